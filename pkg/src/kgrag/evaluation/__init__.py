from .metrics import PRF, bleu, lcs_length, metric_tokens, ngrams, rouge_l, rouge_n
from .odqa import (
    CATEGORIES,
    FlatRAG,
    QAItem,
    baseline_flat_rag,
    compare_systems,
    load_qa,
    render_table,
    run_odqa,
    score_answer,
    validate_report,
)

__all__ = [
    "CATEGORIES",
    "PRF",
    "FlatRAG",
    "QAItem",
    "baseline_flat_rag",
    "bleu",
    "compare_systems",
    "lcs_length",
    "load_qa",
    "metric_tokens",
    "ngrams",
    "render_table",
    "rouge_l",
    "rouge_n",
    "run_odqa",
    "score_answer",
    "validate_report",
]
