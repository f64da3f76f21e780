"""Regenerate golden files under fixtures/golden from the shipped fixtures.

Run after an intentional behaviour change, then review the diff.
"""

from __future__ import annotations

import tempfile
from pathlib import Path

from kgrag.cli import main
from kgrag.prompts import render_prompt
from kgrag.providers import MockGenerator

ROOT = Path(__file__).resolve().parent.parent
FIX = ROOT / "fixtures"
GOLDEN = FIX / "golden"
GOLDEN_QUERY = "What does the ammonia converter yield?"
GOLDEN_PROMPT = render_prompt(
    "summarize_community",
    "Condense these relationships.",
    relations="crude oil -[enters]-> distillation column\ndistillation column -[separates]-> naphtha",
)


def run() -> None:
    GOLDEN.mkdir(exist_ok=True)
    cfg = str(FIX / "config.yaml")
    with tempfile.TemporaryDirectory() as tmp:
        graph = str(Path(tmp) / "graph.json")
        assert main(["--config", cfg, "build", "--corpus", str(FIX / "corpus.jsonl"), "--out", graph]) == 0
        assert main(["--config", cfg, "query", "--graph", graph, GOLDEN_QUERY,
                     "--out", str(GOLDEN / "query_result.json")]) == 0
        assert main(["--config", cfg, "export", "--graph", graph, "--out", str(GOLDEN / "statements.cypher")]) == 0
    (GOLDEN / "generate_prompt.txt").write_text(GOLDEN_PROMPT, encoding="utf-8")
    (GOLDEN / "generate_output.txt").write_text(MockGenerator(seed=7).generate(GOLDEN_PROMPT), encoding="utf-8")


if __name__ == "__main__":
    run()
