"""Preference graphs and the transformations that pick arbitrage candidates.

Pipeline order is fixed: :func:`threshold_edges`, then
:func:`prune_intermediate`, then :func:`select_vertices`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConsistencyError
from .signal import PreferenceMatrix, pair_arrays

CONSISTENCY_TOL = 1e-9


@dataclass(frozen=True)
class PreferenceGraph:
    """Weighted DAG: edge ``src[k] -> dst[k]`` means src preferred, weight > 0."""

    n: int
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    utilities: np.ndarray

    def __post_init__(self) -> None:
        for name in ("src", "dst"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.int64))
        object.__setattr__(self, "weight", np.asarray(self.weight, dtype=float))
        object.__setattr__(self, "utilities", np.asarray(self.utilities, dtype=float))

    @property
    def n_edges(self) -> int:
        return len(self.src)

    def edges(self) -> set[tuple[int, int, float]]:
        return {(int(a), int(b), float(w)) for a, b, w in zip(self.src, self.dst, self.weight)}

    def in_degree(self) -> np.ndarray:
        return np.bincount(self.dst, minlength=self.n)

    def out_degree(self) -> np.ndarray:
        return np.bincount(self.src, minlength=self.n)

    def _keep(self, mask: np.ndarray) -> PreferenceGraph:
        return PreferenceGraph(self.n, self.src[mask], self.dst[mask], self.weight[mask], self.utilities)


@dataclass(frozen=True)
class TradeSignalSet:
    longs: frozenset[int] = frozenset()
    shorts: frozenset[int] = frozenset()
    # sign of rho*(i, j) for i < j among surviving edges
    relation: dict[tuple[int, int], int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "longs", frozenset(int(i) for i in self.longs))
        object.__setattr__(self, "shorts", frozenset(int(i) for i in self.shorts))
        if self.longs & self.shorts:
            raise ValueError(f"securities on both legs: {sorted(self.longs & self.shorts)}")

    @property
    def empty(self) -> bool:
        return not self.longs and not self.shorts


def build_graph(prefs: PreferenceMatrix, utilities) -> PreferenceGraph:
    """One edge per pair with non-zero consistent preference, pointing to the less preferred."""
    u = np.asarray(utilities, dtype=float)
    if len(u) != prefs.n:
        raise ConsistencyError(f"{len(u)} utilities for {prefs.n} securities")
    I, J = pair_arrays(prefs.n)
    rho = prefs.values
    gap = np.abs(rho - (u[I] - u[J]))
    if gap.size and gap.max() > CONSISTENCY_TOL:
        raise ConsistencyError(f"preferences differ from utility differences by {gap.max():.3g}")
    pos, neg = rho > 0, rho < 0
    return PreferenceGraph(
        n=prefs.n,
        src=np.concatenate([I[pos], J[neg]]),
        dst=np.concatenate([J[pos], I[neg]]),
        weight=np.concatenate([rho[pos], -rho[neg]]),
        utilities=u,
    )


def graph_from_utilities(u) -> PreferenceGraph:
    from .potential import consistent_preferences

    return build_graph(consistent_preferences(u), u)


def threshold_edges(g: PreferenceGraph, kappa: float) -> PreferenceGraph:
    """Keep edges whose weight is at least ``kappa``."""
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    return g._keep(g.weight >= kappa)


def vertex_roles(g: PreferenceGraph) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Boolean masks (sources, sinks, isolated) from the current degrees."""
    d_in, d_out = g.in_degree(), g.out_degree()
    return (d_in == 0) & (d_out > 0), (d_out == 0) & (d_in > 0), (d_in == 0) & (d_out == 0)


def prune_intermediate(g: PreferenceGraph, literal: bool = False) -> PreferenceGraph:
    """Drop every edge that does not run from a source to a sink.

    The result is bipartite. ``literal=True`` instead keeps a stored pair
    (i < j) whenever vertex ``i`` alone is a source or a sink, which can leave
    intermediate vertices in place; it exists for comparison only.
    """
    sources, sinks, _ = vertex_roles(g)
    if not literal:
        return g._keep(sources[g.src] & sinks[g.dst])
    d_in, d_out = g.in_degree(), g.out_degree()
    low = np.minimum(g.src, g.dst)
    return g._keep((d_in[low] == 0) | (d_out[low] == 0))


def _ranked(candidates: np.ndarray, u: np.ndarray, count: int, highest: bool) -> list[int]:
    if count <= 0 or candidates.size == 0:
        return []
    key = -u[candidates] if highest else u[candidates]
    # lexsort: last key primary; ties go to the lower index
    order = np.lexsort((candidates, key))
    return [int(i) for i in candidates[order[:count]]]


def select_vertices(g: PreferenceGraph, n_top: int, m_bottom: int) -> TradeSignalSet:
    """Long the ``n_top`` highest-utility sources, short the ``m_bottom`` lowest-utility sinks."""
    if n_top < 0 or m_bottom < 0:
        raise ValueError("selection counts must be non-negative")
    sources, sinks, _ = vertex_roles(g)
    u = g.utilities
    longs = _ranked(np.flatnonzero(sources), u, n_top, highest=True)
    shorts = _ranked(np.flatnonzero(sinks), u, m_bottom, highest=False)

    kept = np.zeros(g.n, dtype=bool)
    kept[longs + shorts] = True
    relation = {}
    for a, b in zip(g.src, g.dst):
        if kept[a] and kept[b]:
            relation[(int(min(a, b)), int(max(a, b)))] = 1 if a < b else -1
    return TradeSignalSet(frozenset(longs), frozenset(shorts), relation)


def select_signals(u, kappa: float, n_top: int, m_bottom: int) -> tuple[PreferenceGraph, TradeSignalSet]:
    """Threshold, prune and select on the graph of utilities ``u``."""
    g = prune_intermediate(threshold_edges(graph_from_utilities(u), kappa))
    return g, select_vertices(g, n_top, m_bottom)


def sign_relation(g: PreferenceGraph) -> np.ndarray:
    """Dense n x n matrix of the relation sign(rho*) carried by the edges."""
    m = np.zeros((g.n, g.n), dtype=np.int8)
    m[g.src, g.dst] = 1
    m[g.dst, g.src] = -1
    return m


def relation_violations(g: PreferenceGraph) -> dict[str, int]:
    """Count irreflexivity, asymmetry, transitivity and bipartiteness violations.

    Exhaustive over vertices, pairs and triples; intended for small graphs.
    """
    d_in, d_out = g.in_degree(), g.out_degree()
    self_loops = int(np.sum(g.src == g.dst))
    pairs = {}
    for a, b in zip(g.src.tolist(), g.dst.tolist()):
        key = (min(a, b), max(a, b))
        pairs[key] = pairs.get(key, 0) + 1
    asymmetry = sum(c - 1 for c in pairs.values())

    adj = np.zeros((g.n, g.n), dtype=bool)
    adj[g.src, g.dst] = True
    # i -> j -> k present and i -> k missing (absent or reversed)
    two_step = (adj.astype(np.int64) @ adj.astype(np.int64)) > 0
    transitivity = int(np.sum(two_step & ~adj))
    bipartite = int(np.sum((d_in > 0) & (d_out > 0)))
    return {
        "irreflexivity": self_loops,
        "asymmetry": asymmetry,
        "transitivity": transitivity,
        "bipartite": bipartite,
    }


def has_cycle(g: PreferenceGraph) -> bool:
    """Kahn's algorithm: a cycle exists iff not every vertex can be peeled."""
    d_in = g.in_degree().copy()
    out: list[list[int]] = [[] for _ in range(g.n)]
    for a, b in zip(g.src.tolist(), g.dst.tolist()):
        out[a].append(b)
    stack = [v for v in range(g.n) if d_in[v] == 0]
    seen = 0
    while stack:
        v = stack.pop()
        seen += 1
        for w in out[v]:
            d_in[w] -= 1
            if d_in[w] == 0:
                stack.append(w)
    return seen != g.n


def write_graph(g: PreferenceGraph, edges_path, utilities_path, labels=None) -> None:
    """Debug dump: ``from,to,weight`` edge list plus ``security,utility`` table."""
    labels = list(labels) if labels is not None else [str(i) for i in range(g.n)]
    order = np.lexsort((g.dst, g.src))
    with Path(edges_path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["from", "to", "weight"])
        for k in order:
            w.writerow([labels[g.src[k]], labels[g.dst[k]], repr(float(g.weight[k]))])
    with Path(utilities_path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["security", "utility"])
        for label, value in zip(labels, g.utilities):
            w.writerow([label, repr(float(value))])
