"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures onto its
documented exit statuses (2 config, 3 provider, 4 data, 5 internal).
"""

from __future__ import annotations


class KGRagError(Exception):
    exit_code = 5


class ConfigError(KGRagError):
    exit_code = 2


class ProviderError(KGRagError):
    exit_code = 3


class TransportError(ProviderError):
    """An HTTP-backed provider failed after exhausting its retries."""


class ProviderContractError(ProviderError):
    """A provider returned something that breaks its contract (e.g. empty text)."""


class DataError(KGRagError):
    exit_code = 4


class ParseError(DataError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConflictError(DataError):
    def __init__(self, doc_id: str):
        self.doc_id = doc_id
        super().__init__(f"duplicate document id {doc_id!r}")


class MissingInputError(DataError):
    pass


class GraphFormatError(DataError):
    pass


class UnsupportedVersionError(GraphFormatError):
    pass


class GraphNotBuiltError(DataError):
    pass


class InvalidWindowError(ValueError, KGRagError):
    exit_code = 2


class InvalidStrideError(ValueError, KGRagError):
    exit_code = 2


class ExtractionFormatError(ProviderError):
    """Extraction output had no parseable record lines."""


class IncompletePartitionError(ValueError, KGRagError):
    pass


class MissingSummaryError(DataError):
    def __init__(self, community_id: str):
        self.community_id = community_id
        super().__init__(f"community {community_id} has no summary embedding")


class CycleError(ValueError, KGRagError):
    def __init__(self, cycle: list[str]):
        self.cycle = cycle
        super().__init__("dependency cycle: " + " -> ".join(cycle))


class AggregationError(KGRagError):
    exit_code = 3
