"""Explicit factor matching schemes built on top of the stable multi-matching.

* ``finite_component_scheme``: complete bipartite groups K_{n,n} per degree class.
* ``percolating_scheme``: one alternating path through every matched point
  with at least two stubs, completed by a restricted stable matching.
* ``alternating_truncation``: staged matching for infinite-mean degrees.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, minimum_spanning_tree
from scipy.spatial import cKDTree

from .errors import UnsupportedCase
from .matcher import Matching, Restriction, stable_matching
from .sampling import MarkLaw
from .spatial import Color, PointConfig, Window, pair_distances

__all__ = [
    "FiniteSchemeResult",
    "PercolatingResult",
    "StageReport",
    "TruncationResult",
    "finite_component_scheme",
    "percolating_scheme",
    "alternating_truncation",
    "type_thresholds",
]

TREE_SURROGATE = "euclidean-mst-dfs"


def _stable_pairs(window: Window, pos_a: np.ndarray, pos_b: np.ndarray) -> list[tuple[int, int]]:
    """Two-color stable (one-to-one) matching between two point sets, as index pairs."""
    if len(pos_a) == 0 or len(pos_b) == 0:
        return []
    cfg = PointConfig(window, np.concatenate([pos_a, pos_b]),
                      np.r_[np.zeros(len(pos_a), np.int8), np.ones(len(pos_b), np.int8)],
                      np.ones(len(pos_a) + len(pos_b), np.int64))
    m = stable_matching(cfg)
    na = len(pos_a)
    return sorted((r, b - na) for r, b in m.edges)


def _nn_distance(window: Window, pos: np.ndarray) -> np.ndarray:
    """Distance from each point to its nearest other point of the same set."""
    if len(pos) < 2:
        return np.full(len(pos), np.inf)
    tree = cKDTree(pos, boxsize=window.side if window.torus else None)
    _, nb = tree.query(pos, k=2)
    return pair_distances(window, pos, pos[nb[:, 1]])


def type_thresholds(distances: np.ndarray, n: int) -> np.ndarray:
    """Empirical quantiles d_1 < ... < d_{n-1} splitting the sample into n equal parts."""
    ds = np.sort(distances)
    count = ds.size
    return np.array([ds[math.ceil(i * count / n) - 1] for i in range(1, n)]) if count else np.empty(0)


@dataclass
class FiniteSchemeResult:
    matching: Matching
    groups: list
    leftovers: list
    thresholds: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)


def _chains(window, ids, types, n, pos):
    """Chain type i points to type i+1 points by successive stable matchings."""
    chains = [[int(x)] for x in ids[types == 1]]
    leftover = []
    for t in range(2, n + 1):
        nxt = ids[types == t]
        ends = np.array([c[-1] for c in chains], dtype=np.int64)
        pairs = _stable_pairs(window, pos[ends].reshape(-1, window.dimension), pos[nxt])
        used_chain = {a for a, _ in pairs}
        used_next = {b for _, b in pairs}
        leftover += [x for k, c in enumerate(chains) if k not in used_chain for x in c]
        leftover += [int(nxt[k]) for k in range(len(nxt)) if k not in used_next]
        chains = [chains[a] + [int(nxt[b])] for a, b in pairs]
    return chains, leftover


def finite_component_scheme(cfg: PointConfig, red_law: Optional[MarkLaw] = None,
                            blue_law: Optional[MarkLaw] = None) -> FiniteSchemeResult:
    """Partition each degree class into groups of n red and n blue points joined as K_{n,n}.

    Points are typed by the quantile bin of their nearest same-class distance;
    within each color, type i points are stably matched to type i+1 points
    (i ascending), and complete chains are joined across colors at type 1.
    Points whose chain cannot be completed in the finite sample are returned
    in ``leftovers`` and keep all their stubs.
    """
    if red_law is not None and blue_law is not None and red_law != blue_law:
        raise UnsupportedCase("the finite-component scheme needs identical red and blue degree laws")
    w = cfg.window
    pos = cfg.positions
    groups, leftovers, edges = [], [], set()
    thresholds = {}
    for n in sorted(set(cfg.stubs.tolist())):
        R = np.flatnonzero((cfg.colors == Color.RED) & (cfg.stubs == n))
        B = np.flatnonzero((cfg.colors == Color.BLUE) & (cfg.stubs == n))
        if R.size == 0 or B.size == 0:
            leftovers += R.tolist() + B.tolist()
            continue
        dr, db = _nn_distance(w, pos[R]), _nn_distance(w, pos[B])
        cuts = type_thresholds(np.concatenate([dr, db]), n)
        thresholds[n] = cuts.tolist()
        tr = np.searchsorted(cuts, dr, side="left") + 1
        tb = np.searchsorted(cuts, db, side="left") + 1
        red_chains, lo_r = _chains(w, R, tr, n, pos)
        blue_chains, lo_b = _chains(w, B, tb, n, pos)
        leftovers += lo_r + lo_b
        heads_r = np.array([c[0] for c in red_chains], dtype=np.int64)
        heads_b = np.array([c[0] for c in blue_chains], dtype=np.int64)
        pairs = _stable_pairs(w, pos[heads_r].reshape(-1, w.dimension), pos[heads_b].reshape(-1, w.dimension))
        used_r = {a for a, _ in pairs}
        used_b = {b for _, b in pairs}
        leftovers += [x for k, c in enumerate(red_chains) if k not in used_r for x in c]
        leftovers += [x for k, c in enumerate(blue_chains) if k not in used_b for x in c]
        for a, b in pairs:
            group = red_chains[a] + blue_chains[b]
            groups.append(group)
            edges.update((r, q) for r in red_chains[a] for q in blue_chains[b])
    groups.sort()
    return FiniteSchemeResult(Matching.from_edges(cfg, edges), groups, sorted(leftovers), thresholds,
                              {"quantiles": "empirical nearest same-class distance"})


@dataclass
class PercolatingResult:
    matching: Matching
    path: list
    path_edges: list
    allowance: np.ndarray
    metadata: dict = field(default_factory=dict)


def _spanning_tree(window: Window, ids: np.ndarray, pos: np.ndarray):
    """Euclidean minimum spanning tree (window metric) as adjacency lists over ``ids``."""
    m = len(ids)
    adj = {int(x): [] for x in ids}
    if m < 2:
        return adj
    boxsize = window.side if window.torus else None
    tree = cKDTree(pos, boxsize=boxsize)
    r = 2.0 * (window.volume / m) ** (1.0 / window.dimension)
    while True:
        last = r >= window.diameter
        pairs = tree.query_pairs(window.diameter * 1.000001 if last else r, output_type="ndarray")
        if len(pairs):
            dist = pair_distances(window, pos[pairs[:, 0]], pos[pairs[:, 1]])
            graph = coo_matrix((dist, (pairs[:, 0], pairs[:, 1])), shape=(m, m)).tocsr()
            if last or connected_components(graph, directed=False)[0] == 1:
                break
        r *= 2.0
    mst = minimum_spanning_tree(graph).tocoo()
    for a, b in zip(mst.row, mst.col):
        adj[int(ids[a])].append(int(ids[b]))
        adj[int(ids[b])].append(int(ids[a]))
    return adj


def _dfs_order(cfg: PointConfig, adj: dict, root: int) -> list[int]:
    """Preorder DFS; children visited by increasing distance from their parent."""
    order, seen = [], {root}
    stack = [root]
    while stack:
        v = stack.pop()
        order.append(v)
        kids = [c for c in adj[v] if c not in seen]
        seen.update(kids)
        if kids:
            dist = cfg.distances(np.array(kids), v)
            ranked = [kids[k] for k in np.lexsort((kids, dist))]
            stack.extend(reversed(ranked))
    return order


def percolating_scheme(cfg: PointConfig, engine: str = "greedy") -> PercolatingResult:
    """Alternating red/blue path through the matched points with >= 2 stubs.

    A stable one-to-one matching pairs the >= 2-stub points of both colors;
    the matched blue points are ordered by depth-first search of their
    minimum spanning tree, and every blue point is linked to the red partner
    of the next blue point in that order. Leftover stubs are then matched by
    the stable multi-matching with the path edges forbidden.
    """
    R2 = np.flatnonzero((cfg.colors == Color.RED) & (cfg.stubs >= 2))
    B2 = np.flatnonzero((cfg.colors == Color.BLUE) & (cfg.stubs >= 2))
    if R2.size < 2 or B2.size < 2:
        raise UnsupportedCase("need at least two points with >= 2 stubs of each color")
    w = cfg.window
    pairs = _stable_pairs(w, cfg.positions[R2], cfg.positions[B2])
    partner = {int(B2[b]): int(R2[a]) for a, b in pairs}
    blues = np.array(sorted(partner), dtype=np.int64)
    adj = _spanning_tree(w, blues, cfg.positions[blues])
    order = _dfs_order(cfg, adj, int(blues[0]))

    path = []
    for b in order:
        path += [partner[b], b]
    path_edges = [(path[k], path[k + 1]) if k % 2 == 0 else (path[k + 1], path[k])
                  for k in range(len(path) - 1)]
    used = np.zeros(cfg.n, dtype=np.int64)
    np.add.at(used, np.array(path_edges).ravel(), 1)
    allowance = cfg.stubs - used
    restriction = Restriction.from_pairs(cfg, path_edges)
    rest = stable_matching(cfg, restriction, capacity=allowance, engine=engine)
    edges = set(path_edges) | set(rest.edges)

    lower = min(R2.size, B2.size)
    metadata = {
        "tree": TREE_SURROGATE,
        "red_ge2": int(R2.size),
        "blue_ge2": int(B2.size),
        "lower_color": "blue" if B2.size <= R2.size else "red",
        "counts_close": bool(abs(R2.size - B2.size) <= 2 * math.sqrt(lower)),
    }
    return PercolatingResult(Matching.from_edges(cfg, edges), path, path_edges, allowance, metadata)


@dataclass(frozen=True)
class StageReport:
    stage: int
    cap_red: int
    cap_blue: int
    saturated_color: str
    edges_added: int
    designated_color: str
    allowed_stubs: int
    leftover_stubs: int
    leftover_points: tuple

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["leftover_points"] = list(self.leftover_points)
        return d

    @property
    def leftover_fraction(self) -> float:
        return self.leftover_stubs / self.allowed_stubs if self.allowed_stubs else 0.0


@dataclass
class TruncationResult:
    matching: Matching
    stages: list
    stage_edges: list = field(default_factory=list)


def alternating_truncation(cfg: PointConfig, caps, engine: str = "greedy") -> TruncationResult:
    """Stage i matches at most min(stubs, J_i) red and min(stubs, K_i) blue stubs per point.

    Each stage runs the stable multi-matching on the stubs allowed but not yet
    used, with every earlier edge forbidden. Odd stages are designed to
    saturate red, even stages blue; the designated color's points that still
    have allowed stubs are reported as finite-volume leftovers.
    """
    red = cfg.colors == Color.RED
    deg = np.zeros(cfg.n, dtype=np.int64)
    edges: set = set()
    reports, per_stage = [], []
    for stage, (cap_red, cap_blue) in enumerate(caps, start=1):
        limit = np.where(red, np.minimum(cfg.stubs, cap_red), np.minimum(cfg.stubs, cap_blue))
        allowance = np.maximum(limit - deg, 0)
        m = stable_matching(cfg, Restriction(frozenset(edges)), capacity=allowance, engine=engine)
        new = m.degree(cfg.n)
        unused = allowance - new
        edges |= m.edges
        per_stage.append(m.edges)
        deg += new
        red_left, blue_left = int(unused[red].sum()), int(unused[~red].sum())
        saturated = ("both" if red_left == blue_left == 0 else "red" if red_left == 0
                     else "blue" if blue_left == 0 else "none")
        designated = "red" if stage % 2 else "blue"
        mask = red if designated == "red" else ~red
        reports.append(StageReport(
            stage=stage, cap_red=int(cap_red), cap_blue=int(cap_blue), saturated_color=saturated,
            edges_added=len(m.edges), designated_color=designated,
            allowed_stubs=int(limit[mask].sum()), leftover_stubs=int(unused[mask].sum()),
            leftover_points=tuple(int(x) for x in np.flatnonzero(mask & (unused > 0))),
        ))
    return TruncationResult(Matching.from_edges(cfg, edges), reports, per_stage)
