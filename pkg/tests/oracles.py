"""Independent reference implementations used only by the tests.

They are written from the textbook definitions, deliberately without sharing
code with the package.
"""

from __future__ import annotations

import math


def modularity_double_sum(nodes, edges, assignment, gamma=1.0):
    """Q = 1/(2m) sum_ij [A_ij - gamma k_i k_j / 2m] delta(c_i, c_j) over a 0/1 adjacency."""
    idx = {n: i for i, n in enumerate(nodes)}
    n = len(nodes)
    A = [[0] * n for _ in range(n)]
    for u, v in edges:
        if u == v:
            continue
        A[idx[u]][idx[v]] = 1
        A[idx[v]][idx[u]] = 1
    k = [sum(row) for row in A]
    two_m = sum(k)
    if two_m == 0:
        return 0.0
    total = 0.0
    for i in range(n):
        for j in range(n):
            if assignment[nodes[i]] == assignment[nodes[j]]:
                total += A[i][j] - gamma * k[i] * k[j] / two_m
    return total / two_m


def set_partitions(items):
    """All set partitions of ``items`` (Bell-number many)."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


def best_modularity(nodes, edges):
    best, arg = -math.inf, None
    for part in set_partitions(nodes):
        assign = {v: ci for ci, block in enumerate(part) for v in block}
        q = modularity_double_sum(nodes, edges, assign)
        if q > best + 1e-15:
            best, arg = q, part
    return best, arg


def edit_distance(a: str, b: str) -> int:
    """Plain Wagner-Fischer with a full table."""
    D = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(len(a) + 1):
        D[i][0] = i
    for j in range(len(b) + 1):
        D[0][j] = j
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            D[i][j] = min(D[i - 1][j] + 1, D[i][j - 1] + 1, D[i - 1][j - 1] + (a[i - 1] != b[j - 1]))
    return D[len(a)][len(b)]


def window_placements(L, w, s):
    """Enumerate windows by walking starts one token at a time."""
    spans = []
    start = 0
    while start < L:
        end = start
        while end < L and end - start < w:
            end += 1
        spans.append((start, end))
        start += s
    return spans


def dot(a, b):
    return sum(x * y for x, y in zip(a, b))


def cos(a, b):
    na, nb = math.sqrt(dot(a, a)), math.sqrt(dot(b, b))
    if na == 0 or nb == 0:
        return 0.0
    return dot(a, b) / (na * nb)


def _grams(tokens, n):
    out = {}
    for i in range(len(tokens) - n + 1):
        g = " ".join(tokens[i:i + n])
        out[g] = out.get(g, 0) + 1
    return out


def bleu_oracle(cand, refs, max_n=4):
    """Sentence BLEU, uniform weights, closest-ref brevity penalty, add-one on zero counts for n > 1."""
    if not cand:
        return 0.0
    logs = []
    for n in range(1, max_n + 1):
        cg = _grams(cand, n)
        total = sum(cg.values())
        matched = 0
        for g, c in cg.items():
            matched += min(c, max(_grams(r, n).get(g, 0) for r in refs))
        if matched == 0:
            if n == 1:
                return 0.0
            logs.append(math.log(1 / (total + 1)))
        else:
            logs.append(math.log(matched / total))
    c = len(cand)
    r = sorted((abs(len(x) - c), len(x)) for x in refs)[0][1]
    bp = 1.0 if c > r else math.exp(1 - r / c)
    return bp * math.exp(sum(logs) / max_n)


def rouge_n_oracle(cand, ref, n):
    cg, rg = _grams(cand, n), _grams(ref, n)
    if not rg:
        return 0.0, 0.0, 0.0
    overlap = sum(min(c, rg.get(g, 0)) for g, c in cg.items())
    p = overlap / sum(cg.values()) if cg else 0.0
    r = overlap / sum(rg.values())
    f = 0.0 if p + r == 0 else 2 * p * r / (p + r)
    return p, r, f


def lcs_oracle(a, b):
    """Memoized recursion, independent of the tabular implementation."""
    from functools import lru_cache

    @lru_cache(maxsize=None)
    def go(i, j):
        if i == len(a) or j == len(b):
            return 0
        if a[i] == b[j]:
            return 1 + go(i + 1, j + 1)
        return max(go(i + 1, j), go(i, j + 1))

    return go(0, 0)


def rouge_l_oracle(cand, ref):
    if not cand or not ref:
        return 0.0, 0.0, 0.0
    lcs = lcs_oracle(tuple(cand), tuple(ref))
    p, r = lcs / len(cand), lcs / len(ref)
    f = 0.0 if p + r == 0 else 2 * p * r / (p + r)
    return p, r, f


def all_paths(triples, nodes, seeds, max_hops):
    """Every simple directed path of 1..max_hops hops from a seed, by DFS over unique (s, p, o) hops."""
    hops = sorted({(t.subject, t.predicate, t.object) for t in triples if t.subject in nodes and t.object in nodes})
    out = []

    def dfs(ents, preds):
        if preds:
            out.append((tuple(ents), tuple(preds)))
        if len(preds) == max_hops:
            return
        for s, p, o in hops:
            if s == ents[-1] and o not in ents:
                dfs(ents + [o], preds + [p])

    for seed in dict.fromkeys(seeds):
        if seed in nodes:
            dfs([seed], [])
    return out


def topo_ok(waves, deps):
    pos = {}
    for i, wave in enumerate(waves):
        for sid in wave:
            pos[sid] = i
    return set(pos) == set(deps) and all(pos[d] < pos[s] for s, ds in deps.items() for d in ds)


def is_connected(nodes, edges):
    if not nodes:
        return True
    adj = {v: set() for v in nodes}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    seen, stack = {nodes[0]}, [nodes[0]]
    while stack:
        for u in adj[stack.pop()] - seen:
            seen.add(u)
            stack.append(u)
    return len(seen) == len(nodes)
