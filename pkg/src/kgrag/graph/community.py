"""Modularity and hierarchical Leiden community detection."""

from __future__ import annotations

import heapq
import math
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..errors import IncompletePartitionError

DEFAULT_SEED = 42
DEFAULT_MAX_LEVELS = 3
DEFAULT_RESOLUTION = 1.0
DEFAULT_RESTARTS = 16
# Leiden refinement randomness
THETA = 0.01
_EPS = 1e-10
# vertex-moving fine-tuning is quadratic per sweep; skip it on larger working graphs
FINE_TUNE_MAX_NODES = 64


@dataclass(frozen=True)
class UndirectedGraph:
    """Weighted simple graph; ``edges`` holds ``(u, v, weight)`` with ``u < v``."""

    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str, float], ...] = ()

    @classmethod
    def from_edges(cls, nodes: Sequence[str], edges) -> UndirectedGraph:
        """Build from ``(u, v)`` or ``(u, v, w)`` items; repeated pairs add weight, loops are ignored."""
        weights: dict[tuple[str, str], float] = defaultdict(float)
        node_set = set(nodes)
        for e in edges:
            u, v = e[0], e[1]
            w = float(e[2]) if len(e) > 2 else 1.0
            node_set.update((u, v))
            if u == v:
                continue
            weights[(u, v) if u < v else (v, u)] += w
        return cls(tuple(sorted(node_set)), tuple((u, v, w) for (u, v), w in sorted(weights.items())))

    def projection(self) -> UndirectedGraph:
        return self

    def induced_edges(self, members) -> frozenset[int]:
        members = set(members)
        return frozenset(i for i, (u, v, _) in enumerate(self.edges) if u in members and v in members)


@dataclass(frozen=True)
class Partition:
    assignment: dict[str, str]
    modularity: float
    level: int = 0

    def communities(self) -> dict[str, frozenset[str]]:
        groups: dict[str, set] = defaultdict(set)
        for node, c in self.assignment.items():
            groups[c].add(node)
        return {c: frozenset(m) for c, m in sorted(groups.items())}


@dataclass(eq=False)
class Community:
    id: str
    level: int
    members: frozenset[str]
    induced_edges: frozenset[int]
    summary: str | None = None
    summary_embedding: np.ndarray | None = None

    def __post_init__(self):
        if not self.members:
            raise ValueError(f"community {self.id} has no members")
        self.members = frozenset(self.members)
        self.induced_edges = frozenset(self.induced_edges)

    @property
    def sort_key(self) -> tuple[int, int]:
        level, idx = self.id[1:].split("-")
        return (int(level), int(idx))

    def __eq__(self, other):
        if not isinstance(other, Community):
            return NotImplemented
        same_vec = (
            self.summary_embedding is None and other.summary_embedding is None
        ) or (
            self.summary_embedding is not None
            and other.summary_embedding is not None
            and np.array_equal(self.summary_embedding, other.summary_embedding)
        )
        return (
            self.id == other.id and self.level == other.level and self.members == other.members
            and self.induced_edges == other.induced_edges and self.summary == other.summary and same_vec
        )

    __hash__ = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "level": self.level,
            "members": sorted(self.members),
            "induced_edges": sorted(self.induced_edges),
            "summary": self.summary,
            "summary_embedding": None if self.summary_embedding is None else self.summary_embedding.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> Community:
        vec = d.get("summary_embedding")
        return cls(
            d["id"], int(d["level"]), frozenset(d["members"]), frozenset(d["induced_edges"]),
            d.get("summary"), None if vec is None else np.asarray(vec, dtype=np.float64),
        )


@dataclass
class CommunityHierarchy:
    partitions: list[Partition]
    communities: list[Community]
    seed: int = DEFAULT_SEED
    resolution: float = DEFAULT_RESOLUTION
    restarts: int = DEFAULT_RESTARTS

    def at_level(self, level: int) -> list[Community]:
        return [c for c in self.communities if c.level == level]

    @property
    def levels(self) -> list[int]:
        return sorted({c.level for c in self.communities})

    def get(self, community_id: str) -> Community:
        for c in self.communities:
            if c.id == community_id:
                return c
        raise KeyError(community_id)

    def __eq__(self, other):
        if not isinstance(other, CommunityHierarchy):
            return NotImplemented
        return (self.partitions, self.communities, self.seed, self.resolution, self.restarts) == (
            other.partitions, other.communities, other.seed, other.resolution, other.restarts)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "resolution": self.resolution,
            "restarts": self.restarts,
            "partitions": [
                {"level": p.level, "modularity": p.modularity, "assignment": dict(sorted(p.assignment.items()))}
                for p in self.partitions
            ],
            "communities": [c.to_dict() for c in self.communities],
        }

    @classmethod
    def from_dict(cls, d: dict) -> CommunityHierarchy:
        return cls(
            partitions=[Partition(dict(p["assignment"]), float(p["modularity"]), int(p["level"])) for p in d["partitions"]],
            communities=[Community.from_dict(c) for c in d["communities"]],
            seed=int(d["seed"]),
            resolution=float(d["resolution"]),
            restarts=int(d.get("restarts", DEFAULT_RESTARTS)),
        )


def modularity(graph, partition: Partition | Mapping[str, object], resolution: float = DEFAULT_RESOLUTION) -> float:
    """Newman modularity of ``partition`` on the graph's undirected projection.

    Computed per community as ``sum_c in_c / m - resolution * (deg_c / 2m)^2``;
    an edgeless graph has modularity 0.
    """
    g = graph.projection()
    assignment = partition.assignment if isinstance(partition, Partition) else partition
    missing = [n for n in g.nodes if n not in assignment]
    if missing:
        raise IncompletePartitionError(f"{len(missing)} node(s) unassigned, e.g. {missing[0]!r}")
    m = sum(w for _, _, w in g.edges)
    if m == 0:
        return 0.0
    internal: dict[object, float] = defaultdict(float)
    degree: dict[object, float] = defaultdict(float)
    for u, v, w in g.edges:
        cu, cv = assignment[u], assignment[v]
        degree[cu] += w
        degree[cv] += w
        if cu == cv:
            internal[cu] += w
    return sum(internal[c] / m - resolution * (degree[c] / (2.0 * m)) ** 2 for c in degree)


class _WorkGraph:
    """Index-based weighted graph used inside Leiden; self-loops are not stored."""

    def __init__(self, n: int, adj: list[dict[int, float]], strength: list[float]):
        self.n = n
        self.adj = adj
        self.strength = strength


def _move_nodes_fast(g: _WorkGraph, comm: list[int], rng, two_m: float, gamma: float) -> list[int]:
    comm = list(comm)
    n = g.n
    tot = [0.0] * n
    size = [0] * n
    for v in range(n):
        tot[comm[v]] += g.strength[v]
        size[comm[v]] += 1
    empties = [c for c in range(n) if size[c] == 0]
    heapq.heapify(empties)

    order = [int(v) for v in rng.permutation(n)]
    queue = deque(order)
    queued = [True] * n
    while queue:
        v = queue.popleft()
        queued[v] = False
        cur = comm[v]
        kv = g.strength[v]
        links: dict[int, float] = defaultdict(float)
        for u, w in g.adj[v].items():
            links[comm[u]] += w
        tot[cur] -= kv
        size[cur] -= 1
        best = cur
        best_gain = links.get(cur, 0.0) - gamma * kv * tot[cur] / two_m
        for c in sorted(links):
            gain = links[c] - gamma * kv * tot[c] / two_m
            if gain > best_gain + _EPS:
                best, best_gain = c, gain
        if best_gain < -_EPS:
            # an empty community (gain 0) beats every candidate
            if size[cur] == 0:
                best = cur
            else:
                while size[empties[0]] != 0:
                    heapq.heappop(empties)
                best = heapq.heappop(empties)
        tot[best] += kv
        size[best] += 1
        if size[cur] == 0 and cur != best:
            heapq.heappush(empties, cur)
        if best != cur:
            comm[v] = best
            for u in g.adj[v]:
                if comm[u] != best and not queued[u]:
                    queued[u] = True
                    queue.append(u)
    return comm


def _fine_tune(g: _WorkGraph, comm: list[int], two_m: float, gamma: float) -> list[int]:
    """Kernighan-Lin style vertex moving.

    Each sweep moves every node once, always taking the best available move
    even when it lowers modularity, then rolls back to the best prefix of the
    sweep. Sweeps repeat while they improve. Escapes optima where two nodes
    must change community together. Deterministic; ties go to the lowest
    node, then the lowest community id.
    """
    n = g.n
    comm = list(comm)
    while True:
        start = list(comm)
        tot = [0.0] * n
        size = [0] * n
        for v in range(n):
            tot[comm[v]] += g.strength[v]
            size[comm[v]] += 1
        moved = [False] * n
        run, best_run, best_state = 0.0, 0.0, None
        for _ in range(n):
            pick = None
            free = next(c for c in range(n) if size[c] == 0) if min(size) == 0 else None
            for v in range(n):
                if moved[v]:
                    continue
                cur, kv = comm[v], g.strength[v]
                links: dict[int, float] = defaultdict(float)
                for u, w in g.adj[v].items():
                    links[comm[u]] += w
                stay = links.get(cur, 0.0) - gamma * kv * (tot[cur] - kv) / two_m
                options = [(links[c] - gamma * kv * tot[c] / two_m, c) for c in links if c != cur]
                if size[cur] > 1 and free is not None:
                    options.append((0.0, free))
                for gain, c in options:
                    key = (gain - stay, -v, -c)
                    if pick is None or key > pick[0]:
                        pick = (key, v, c)
            if pick is None:
                break
            (delta, _, _), v, c = pick
            cur, kv = comm[v], g.strength[v]
            tot[cur] -= kv
            size[cur] -= 1
            tot[c] += kv
            size[c] += 1
            comm[v] = c
            moved[v] = True
            run += delta
            if run > best_run + _EPS:
                best_run, best_state = run, list(comm)
        if best_state is None:
            return start
        comm = best_state


def _split_disconnected(g: _WorkGraph, comm: list[int]) -> list[int]:
    """Give every connected piece of a community its own id (never lowers modularity)."""
    out = [-1] * g.n
    next_id = 0
    for s in range(g.n):
        if out[s] != -1:
            continue
        out[s] = next_id
        stack = [s]
        while stack:
            v = stack.pop()
            for u in g.adj[v]:
                if out[u] == -1 and comm[u] == comm[s]:
                    out[u] = next_id
                    stack.append(u)
        next_id += 1
    return out


def _refine(g: _WorkGraph, comm: list[int], rng, two_m: float, gamma: float) -> list[int]:
    n = g.n
    ref = list(range(n))
    ref_tot = list(g.strength)
    ref_size = [1] * n
    members: dict[int, list[int]] = defaultdict(list)
    for v in range(n):
        members[comm[v]].append(v)

    for c in sorted(members):
        nodes = members[c]
        if len(nodes) == 1:
            continue
        total_c = sum(g.strength[v] for v in nodes)
        # weight from each node / refined subset to the rest of c
        ext = {}
        for v in nodes:
            ext[v] = sum(w for u, w in g.adj[v].items() if comm[u] == c)
        ref_ext = {v: ext[v] for v in nodes}
        for v in (nodes[i] for i in rng.permutation(len(nodes))):
            kv = g.strength[v]
            if ref_size[ref[v]] != 1:
                continue
            if ext[v] < gamma * kv * (total_c - kv) / two_m - _EPS:
                continue
            links: dict[int, float] = defaultdict(float)
            for u, w in g.adj[v].items():
                if comm[u] == c and u != v:
                    links[ref[u]] += w
            own = ref[v]
            ref_tot[own] -= kv
            ref_size[own] -= 1
            cands, gains = [own], [0.0]
            for t in sorted(links):
                if t == own:
                    continue
                if ref_ext[t] < gamma * ref_tot[t] * (total_c - ref_tot[t]) / two_m - _EPS:
                    continue
                gain = links[t] - gamma * kv * ref_tot[t] / two_m
                if gain >= 0:
                    cands.append(t)
                    gains.append(gain)
            top = max(gains)
            probs = np.exp((np.asarray(gains) - top) / THETA)
            probs /= probs.sum()
            choice = cands[int(rng.choice(len(cands), p=probs))]
            ref_tot[choice] += kv
            ref_size[choice] += 1
            if choice != own:
                ref[v] = choice
                ref_ext[choice] = ref_ext[choice] + ext[v] - 2.0 * links[choice]
    return ref


def _aggregate(g: _WorkGraph, ref: list[int]) -> tuple[_WorkGraph, list[int]]:
    ids = {}
    new_of = []
    for v in range(g.n):
        new_of.append(ids.setdefault(ref[v], len(ids)))
    n = len(ids)
    adj: list[dict[int, float]] = [defaultdict(float) for _ in range(n)]
    strength = [0.0] * n
    for v in range(g.n):
        a = new_of[v]
        strength[a] += g.strength[v]
        for u, w in g.adj[v].items():
            b = new_of[u]
            if a != b:
                adj[a][b] += w
    return _WorkGraph(n, [dict(d) for d in adj], strength), new_of


def _canonical(labels: Sequence[int]) -> list[int]:
    """Renumber so community ids follow first appearance in node order."""
    ids: dict[int, int] = {}
    return [ids.setdefault(c, len(ids)) for c in labels]


def leiden(
    graph: UndirectedGraph,
    seed: int | np.random.SeedSequence = DEFAULT_SEED,
    max_levels: int = DEFAULT_MAX_LEVELS,
    resolution: float = DEFAULT_RESOLUTION,
) -> list[list[int]]:
    """Return one community labelling of ``graph.nodes`` per hierarchy level.

    Each level is one Leiden iteration (fast local moving, refinement,
    aggregation); coarser levels come later and never lower modularity.
    Stops when an iteration changes nothing or after ``max_levels`` levels.
    """
    nodes = graph.nodes
    n = len(nodes)
    if n == 0:
        return []
    index = {v: i for i, v in enumerate(nodes)}
    adj: list[dict[int, float]] = [dict() for _ in range(n)]
    strength = [0.0] * n
    for u, v, w in graph.edges:
        a, b = index[u], index[v]
        adj[a][b] = adj[a].get(b, 0.0) + w
        adj[b][a] = adj[b].get(a, 0.0) + w
        strength[a] += w
        strength[b] += w
    two_m = 2.0 * sum(w for _, _, w in graph.edges)
    if two_m == 0:
        return [list(range(n))]

    rng = np.random.default_rng(seed)
    g = _WorkGraph(n, adj, strength)
    node_of = list(range(n))
    comm = list(range(n))
    levels: list[list[int]] = []
    while len(levels) < max(1, max_levels):
        comm = _move_nodes_fast(g, comm, rng, two_m, resolution)
        if g.n <= FINE_TUNE_MAX_NODES:
            comm = _fine_tune(g, comm, two_m, resolution)
        comm = _split_disconnected(g, comm)
        flat = _canonical([comm[node_of[v]] for v in range(n)])
        if levels and flat == levels[-1]:
            break
        levels.append(flat)
        if len(set(comm)) == g.n:
            break
        ref = _refine(g, comm, rng, two_m, resolution)
        g_next, new_of = _aggregate(g, ref)
        agg_comm = [0] * g_next.n
        for v in range(g.n):
            agg_comm[new_of[v]] = comm[v]
        comm = _canonical(agg_comm)
        node_of = [new_of[node_of[v]] for v in range(n)]
        g = g_next
    return levels


def _labels_modularity(graph: UndirectedGraph, labels: Sequence[int], resolution: float) -> float:
    return modularity(graph, dict(zip(graph.nodes, labels)), resolution)


def best_of_restarts(
    graph: UndirectedGraph,
    seed: int = DEFAULT_SEED,
    max_levels: int = DEFAULT_MAX_LEVELS,
    resolution: float = DEFAULT_RESOLUTION,
    restarts: int = DEFAULT_RESTARTS,
) -> list[list[int]]:
    """Run :func:`leiden` with ``restarts`` independent seeds; keep the run whose
    coarsest level has the highest modularity (earliest run on ties).

    Single runs can stop in a local optimum that only a simultaneous move of
    several nodes would escape; independent orderings make that rare.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    children = np.random.SeedSequence(seed).spawn(restarts)
    best, best_q = None, -math.inf
    for child in children:
        levels = leiden(graph, child, max_levels, resolution)
        q = _labels_modularity(graph, levels[-1], resolution) if levels else 0.0
        if q > best_q + _EPS:
            best, best_q = levels, q
    return best


def detect_communities(
    graph,
    seed: int = DEFAULT_SEED,
    max_levels: int = DEFAULT_MAX_LEVELS,
    resolution: float = DEFAULT_RESOLUTION,
    restarts: int = DEFAULT_RESTARTS,
) -> CommunityHierarchy:
    """Run hierarchical Leiden and package the levels as communities.

    ``graph`` is a :class:`KnowledgeGraph` or :class:`UndirectedGraph`.
    Community ids are ``L<level>-<index>`` with indices ordered by each
    community's smallest member id.
    """
    proj = graph.projection()
    partitions, communities = [], []
    for level, labels in enumerate(best_of_restarts(proj, seed, max_levels, resolution, restarts)):
        groups: dict[int, list[str]] = defaultdict(list)
        for node, label in zip(proj.nodes, labels):
            groups[label].append(node)
        assignment = {}
        for idx, label in enumerate(sorted(groups, key=lambda k: min(groups[k]))):
            cid = f"L{level}-{idx}"
            for node in groups[label]:
                assignment[node] = cid
            communities.append(Community(cid, level, frozenset(groups[label]), graph.induced_edges(groups[label])))
        partitions.append(Partition(assignment, modularity(proj, assignment, resolution), level))
    return CommunityHierarchy(partitions, communities, seed, resolution, restarts)
