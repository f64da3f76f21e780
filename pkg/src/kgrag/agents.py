"""Meta-agent orchestration of retrieval sub-agents.

The meta-agent decomposes a task into one subtask per source kind plus an
aggregation step, picks a sub-agent for each subtask by embedding
similarity with the agents' capability documents, runs the subtasks in
dependency waves, merges their outputs and then revises the merged answer
under judge feedback.
"""

from __future__ import annotations

import hashlib
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import Document, SourceKind
from .errors import AggregationError, CycleError, KGRagError
from .prompts import render_prompt
from .providers.base import DEFAULT_ACCEPT_THRESHOLD, Feedback, cosine, normalize

logger = logging.getLogger(__name__)

RETRIEVAL_KINDS = ("image", "scholar", "patent", "wiki", "web")
KIND_TAGS = {"image": "D_I", "scholar": "D_A", "patent": "D_P", "wiki": "D_W", "web": "D_G"}

DEFAULT_N_MAX = 3
DEFAULT_AGENT_TOP_K = 3
DEFAULT_CANDIDATE_LIMIT = 10
SYNTHESIS_MAX_TOKENS = 400
AGGREGATE_MAX_TOKENS = 1024

QUERY_TEMPLATES = {
    "image": "Find images and diagrams of process flow diagrams and instrumentation diagrams for {q}",
    "scholar": "Find scholarly articles, journal papers and research literature on {q}",
    "patent": "Find patents, patent claims and patent filings covering {q}",
    "wiki": "Find Wikipedia encyclopedia articles and background facts about {q}",
    "web": "Find web insights from blogs, forums and industry reports about {q}",
    "aggregate": "Synthesize the retrieved knowledge into a complete description of {q}",
}

CAPABILITIES = {
    "image": "Image agent: retrieves images, diagrams, flowcharts and drawings of process flow diagrams "
             "and instrumentation diagrams from image search and interprets the images and diagrams.",
    "scholar": "Scholar agent: retrieves scholarly articles, journal papers, research literature and "
               "peer-reviewed articles from academic search and summarizes the research.",
    "patent": "Patent agent: retrieves patents, patent claims and patent filings from patent databases "
              "such as USPTO and EPO and analyzes the patent claims.",
    "wiki": "Wiki agent: retrieves Wikipedia encyclopedia articles and summarizes background facts "
            "and key context from Wikipedia.",
    "web": "Web insights agent: gathers web insights from blogs, forums, industry reports and other "
           "websites and summarizes the insights.",
}

INSTRUCTIONS = {
    "image": "Interpret the selected diagrams and describe the equipment, streams and control loops they show.",
    "scholar": "Summarize the selected articles, keeping process conditions, equipment and reaction steps.",
    "patent": "Summarize the key claims and process descriptions of the selected patents.",
    "wiki": "Summarize the key facts and context from the selected encyclopedia articles.",
    "web": "Summarize the practical insights from the selected web sources.",
}


@dataclass(frozen=True)
class Subtask:
    id: str
    query_text: str
    kind: str
    depends_on: frozenset[str] = frozenset()


@dataclass(frozen=True)
class TaskGraph:
    nodes: tuple[Subtask, ...]

    def __post_init__(self):
        ids = [s.id for s in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate subtask ids")
        known = set(ids)
        for s in self.nodes:
            unknown = s.depends_on - known
            if unknown:
                raise ValueError(f"subtask {s.id} depends on unknown subtasks {sorted(unknown)}")

    @property
    def edges(self) -> list[tuple[str, str]]:
        """``(prerequisite, dependent)`` pairs."""
        return sorted((d, s.id) for s in self.nodes for d in s.depends_on)

    def get(self, subtask_id: str) -> Subtask:
        for s in self.nodes:
            if s.id == subtask_id:
                return s
        raise KeyError(subtask_id)


@dataclass(frozen=True)
class SubAgentSpec:
    id: str
    capability_doc: str
    capability_embedding: np.ndarray = field(compare=False)
    source_kind: str

    def __post_init__(self):
        if not self.capability_doc:
            raise ValueError(f"agent {self.id}: empty capability document")
        if abs(np.linalg.norm(self.capability_embedding) - 1.0) > 1e-9:
            raise ValueError(f"agent {self.id}: capability embedding is not unit-norm")


@dataclass(frozen=True)
class InvocationParams:
    instructions: str  # p1
    context: str  # p2
    specific_query: str  # p3

    def __post_init__(self):
        if not self.specific_query.strip():
            raise ValueError("specific query (p3) must be non-empty")


@dataclass(frozen=True)
class AgentOutput:
    subtask_id: str
    kind_tag: str
    text: str
    citations: tuple[tuple[str, float], ...] = ()

    def to_dict(self) -> dict:
        return {"status": "ok", "kind_tag": self.kind_tag, "citations": [list(c) for c in self.citations]}


@dataclass(frozen=True)
class AgentFailure:
    subtask_id: str
    kind_tag: str
    error: str

    def to_dict(self) -> dict:
        return {"status": "failed", "kind_tag": self.kind_tag, "error": self.error}


@dataclass
class RefineResult:
    answer: str
    revisions: int
    trail: list[dict]


def decompose(query: str) -> TaskGraph:
    """Fixed plan: one retrieval subtask per source kind, then aggregation."""
    if not query or not query.strip():
        raise ValueError("task query must be non-empty")
    q = query.strip()
    retrieval = [Subtask(f"q{i}", QUERY_TEMPLATES[kind].format(q=q), kind) for i, kind in enumerate(RETRIEVAL_KINDS, 1)]
    agg = Subtask(f"q{len(retrieval) + 1}", QUERY_TEMPLATES["aggregate"].format(q=q), "aggregate",
                  frozenset(s.id for s in retrieval))
    return TaskGraph(tuple(retrieval) + (agg,))


def default_registry(embed) -> list[SubAgentSpec]:
    return [
        SubAgentSpec(f"{kind}-agent", doc, normalize(embed.embed_text(doc)), kind)
        for kind, doc in CAPABILITIES.items()
    ]


def select_agent(subtask: Subtask, registry: Sequence[SubAgentSpec], embed) -> tuple[SubAgentSpec, float]:
    """Arg-max cosine between subtask query and capability docs; ties by agent id."""
    if not registry:
        raise ValueError("agent registry is empty")
    qv = embed.embed_text(subtask.query_text)
    scored = [(cosine(qv, a.capability_embedding), a) for a in registry]
    best = min(scored, key=lambda sa: (-sa[0], sa[1].id))
    return best[1], best[0]


def _find_cycle(remaining: dict[str, set[str]]) -> list[str]:
    # follow unresolved dependencies until a node repeats
    node = min(remaining)
    path, pos = [], {}
    while node not in pos:
        pos[node] = len(path)
        path.append(node)
        node = min(d for d in remaining[node] if d in remaining)
    return path[pos[node]:] + [node]


def schedule(tg: TaskGraph) -> list[list[str]]:
    """Group subtasks into waves; wave n holds those whose prerequisites all lie in earlier waves."""
    remaining = {s.id: set(s.depends_on) for s in tg.nodes}
    done: set[str] = set()
    waves = []
    while remaining:
        wave = sorted(sid for sid, deps in remaining.items() if deps <= done)
        if not wave:
            raise CycleError(_find_cycle(remaining))
        waves.append(wave)
        done.update(wave)
        for sid in wave:
            del remaining[sid]
    return waves


def _source_line(doc: Document, score: float) -> str:
    if doc.source_kind is SourceKind.IMAGE:
        body = f"image {doc.metadata.get('image_ref', '')}: {doc.title} {doc.text}".strip()
    else:
        body = f"{doc.title}: {doc.text[:1500]}"
    return f"[{doc.id} score={score:.4f}] {' '.join(body.split())}"


def run_subagent(
    agent: SubAgentSpec,
    params: InvocationParams,
    search,
    embed,
    gen,
    top_k: int = DEFAULT_AGENT_TOP_K,
    subtask_id: str = "",
    candidate_limit: int = DEFAULT_CANDIDATE_LIMIT,
) -> AgentOutput | AgentFailure:
    """Retrieve candidates, keep the ``top_k`` closest to the query, synthesize."""
    tag = KIND_TAGS[agent.source_kind]
    try:
        candidates = search.search(agent.source_kind, params.specific_query, max(candidate_limit, top_k))
        if not candidates:
            return AgentOutput(
                subtask_id, tag,
                f"No {agent.source_kind} sources were found for: {params.specific_query}. "
                "This source kind is a stated limitation of the answer.",
            )
        qv = embed.embed_text(params.specific_query)
        scored = []
        for doc in candidates:
            if doc.source_kind is SourceKind.IMAGE:
                vec = embed.embed_image(doc.metadata.get("image_ref", ""))
            else:
                vec = embed.embed_text(f"{doc.title}\n{doc.text}")
            scored.append((cosine(qv, vec), doc))
        selected = sorted(scored, key=lambda sd: (-sd[0], sd[1].id))[:top_k]
        prompt = render_prompt(
            f"synthesize_{agent.source_kind}",
            params.instructions,
            context=params.context or "(none)",
            query=params.specific_query,
            sources="\n".join(_source_line(doc, s) for s, doc in selected),
        )
        text = gen.generate(prompt, max_tokens=SYNTHESIS_MAX_TOKENS)
    except KGRagError as exc:
        logger.warning("sub-agent %s failed on %s: %s", agent.id, subtask_id, exc)
        return AgentFailure(subtask_id, tag, f"{type(exc).__name__}: {exc}")
    if not text.strip():
        return AgentFailure(subtask_id, tag, "empty synthesis")
    return AgentOutput(subtask_id, tag, text, tuple((doc.id, round(s, 12)) for s, doc in selected))


_TAG_ORDER = {tag: i for i, tag in enumerate(KIND_TAGS.values())}
_KIND_OF_TAG = {tag: kind for kind, tag in KIND_TAGS.items()}


def aggregate(query: str, outputs: Sequence[AgentOutput | AgentFailure], gen) -> str:
    """Merge sub-agent outputs in the fixed order D_I, D_A, D_P, D_W, D_G."""
    ordered = sorted(outputs, key=lambda o: (_TAG_ORDER[o.kind_tag], o.subtask_id))
    ok = [o for o in ordered if isinstance(o, AgentOutput)]
    failed = [o for o in ordered if isinstance(o, AgentFailure)]
    if not ok:
        raise AggregationError("every retrieval sub-agent failed; nothing to aggregate")
    sections = {o.kind_tag: o.text for o in ok}
    gaps = ", ".join(_KIND_OF_TAG[o.kind_tag] for o in failed)
    if gaps:
        sections["gaps"] = f"Missing sources: {gaps}"
    text = gen.generate(
        render_prompt(
            "aggregate",
            "Synthesize the sub-agent findings into one coherent, complete answer to the query.",
            query=query,
            **sections,
        ),
        max_tokens=AGGREGATE_MAX_TOKENS,
    )
    if gaps:
        text = f"{text.rstrip()}\n\nMissing sources: {gaps}"
    return text


def refine(
    query: str,
    answer: str,
    judge,
    gen,
    n_max: int = DEFAULT_N_MAX,
    accept_threshold: float = DEFAULT_ACCEPT_THRESHOLD,
) -> RefineResult:
    """Revise ``answer`` with judge feedback until accepted or ``n_max`` revisions.

    Every answer, including the last revision, is judged once, so there are
    at most ``n_max + 1`` judge calls and ``n_max`` revision calls.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    trail: list[dict] = []
    current = answer
    revisions = 0
    while True:
        try:
            fb: Feedback = judge.judge(query, current).with_threshold(accept_threshold)
        except KGRagError as exc:
            trail.append({"iteration": revisions, "error": f"{type(exc).__name__}: {exc}"})
            break
        trail.append({"iteration": revisions, "feedback": fb.to_dict()})
        if fb.accept or revisions >= n_max:
            break
        current = gen.generate(
            render_prompt(
                "refine",
                "Revise the answer to address the reviewer feedback. Keep what was correct.",
                query=query,
                answer=current,
                feedback="\n".join(f"{k}: {v}" for k, v in fb.scores.items()) + (f"\n{fb.comments}" if fb.comments else ""),
            ),
            max_tokens=AGGREGATE_MAX_TOKENS,
        )
        revisions += 1
    return RefineResult(current, revisions, trail)


@dataclass
class NavigationResult:
    document: Document
    trace: dict


def _slug(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")[:40] or "task"


def navigate(
    task: str,
    chemical: str,
    providers,
    registry: Sequence[SubAgentSpec] | None = None,
    n_max: int = DEFAULT_N_MAX,
    accept_threshold: float = DEFAULT_ACCEPT_THRESHOLD,
    top_k: int = DEFAULT_AGENT_TOP_K,
    candidate_limit: int = DEFAULT_CANDIDATE_LIMIT,
    workers: int = 5,
) -> NavigationResult:
    """Run the whole acquisition loop and return the synthesized document plus a trace."""
    if providers.search is None or providers.judge is None:
        raise KGRagError("navigate needs a search provider and a judge provider")
    query = f"{task.strip()} for {chemical.strip()}" if chemical.strip() else task.strip()
    embed, gen = providers.embed, providers.gen
    registry = list(registry) if registry is not None else default_registry(embed)
    tg = decompose(query)
    waves = schedule(tg)

    selections: dict[str, dict] = {}
    results: dict[str, AgentOutput | AgentFailure] = {}
    answer_text = None
    for wave in waves:
        background = "\n\n".join(
            f"{r.kind_tag}: {r.text}" for sid, r in sorted(results.items()) if isinstance(r, AgentOutput)
        )
        retrieval = [tg.get(sid) for sid in wave if tg.get(sid).kind != "aggregate"]
        for st in retrieval:
            agent, score = select_agent(st, registry, embed)
            selections[st.id] = {"agent": agent.id, "score": round(score, 12)}

        def work(st: Subtask):
            agent = next(a for a in registry if a.id == selections[st.id]["agent"])
            params = InvocationParams(INSTRUCTIONS[agent.source_kind], background, st.query_text)
            return run_subagent(agent, params, providers.search, embed, gen, top_k, st.id, candidate_limit)

        if workers > 1 and len(retrieval) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                outs = list(pool.map(work, retrieval))
        else:
            outs = [work(st) for st in retrieval]
        for st, out in zip(retrieval, outs):
            results[st.id] = out
        for sid in wave:
            st = tg.get(sid)
            if st.kind == "aggregate":
                answer_text = aggregate(query, [results[d] for d in sorted(st.depends_on)], gen)

    refined = refine(query, answer_text, providers.judge, gen, n_max, accept_threshold)
    digest = hashlib.sha256(query.encode("utf-8")).hexdigest()[:10]
    doc = Document(
        id=f"synth-{_slug(chemical or task)}-{digest}",
        source_kind=SourceKind.SYNTHESIZED,
        title=query,
        text=refined.answer,
        metadata={"task": task, "chemical": chemical, "revisions": str(refined.revisions)},
    )
    trace = {
        "query": query,
        "subtasks": [
            {"id": s.id, "kind": s.kind, "query": s.query_text, "depends_on": sorted(s.depends_on)} for s in tg.nodes
        ],
        "waves": waves,
        "selections": selections,
        "outputs": {sid: r.to_dict() for sid, r in sorted(results.items())},
        "refine": {"revisions": refined.revisions, "trail": refined.trail},
        "document_id": doc.id,
    }
    return NavigationResult(doc, trace)
