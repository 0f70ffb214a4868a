"""Component structure, stub intensities, edge-length statistics and the
good-cube renormalization lattice."""
from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import DomainError
from .matcher import Matching
from .spatial import Color, PointConfig

__all__ = [
    "UnionFind",
    "ComponentReport",
    "components",
    "StubIntensities",
    "stub_intensities",
    "EdgeLengthStats",
    "total_edge_length",
    "hill_tail_index",
    "CubeLattice",
    "adjacent_cube_reach",
    "renormalize",
]


class UnionFind:
    """Disjoint sets over 0..n-1 with union by size and path halving."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return ra

    def labels(self) -> np.ndarray:
        """Component label per element, numbered 0.. in order of first appearance."""
        roots = np.array([self.find(x) for x in range(len(self.parent))], dtype=np.int64)
        _, first, inverse = np.unique(roots, return_index=True, return_inverse=True)
        rank = np.argsort(np.argsort(first))
        return rank[inverse]


@dataclass
class ComponentReport:
    histogram: dict
    largest_fraction: float
    paths: int
    cycles: int
    other: int
    labels: np.ndarray = field(repr=False)

    @property
    def n_components(self) -> int:
        return sum(self.histogram.values())

    @property
    def mean_size(self) -> float:
        total = sum(s * c for s, c in self.histogram.items())
        return total / self.n_components if self.n_components else 0.0

    @property
    def largest(self) -> int:
        return max(self.histogram) if self.histogram else 0

    def to_dict(self) -> dict:
        return {
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
            "largest_fraction": self.largest_fraction,
            "n_components": self.n_components,
            "mean_size": self.mean_size,
            "structure": {"paths": self.paths, "cycles": self.cycles, "other": self.other},
        }

    def histogram_rows(self) -> list[tuple[int, int]]:
        return sorted(self.histogram.items())


def components(cfg: PointConfig, m: Matching) -> ComponentReport:
    """Connected components of the matching graph on all points of ``cfg``.

    A component whose degrees are all <= 2 is a cycle when every degree is
    exactly 2 and a path otherwise (isolated points count as paths).
    """
    n = cfg.n
    uf = UnionFind(n)
    for r, b in m.edges:
        uf.union(r, b)
    labels = uf.labels()
    if n == 0:
        return ComponentReport({}, 0.0, 0, 0, 0, labels)
    sizes = np.bincount(labels)
    deg = m.degree(n)
    count = sizes.size
    max_deg = np.zeros(count, dtype=np.int64)
    min_deg = np.full(count, np.iinfo(np.int64).max)
    np.maximum.at(max_deg, labels, deg)
    np.minimum.at(min_deg, labels, deg)
    simple = max_deg <= 2
    cycles = int(np.sum(simple & (min_deg == 2)))
    paths = int(np.sum(simple)) - cycles
    return ComponentReport(
        histogram=dict(sorted(Counter(sizes.tolist()).items())),
        largest_fraction=float(sizes.max() / n),
        paths=paths,
        cycles=cycles,
        other=int(np.sum(~simple)),
        labels=labels,
    )


@dataclass(frozen=True)
class StubIntensities:
    matched_red_rate: float
    matched_blue_rate: float
    unmatched_red_rate: float
    unmatched_blue_rate: float
    volume: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def stub_intensities(cfg: PointConfig, m: Matching) -> StubIntensities:
    """Matched and unmatched stubs per unit volume, by color."""
    vol = cfg.window.volume
    red = cfg.colors == Color.RED
    deg = m.degree(cfg.n)
    return StubIntensities(
        matched_red_rate=float(deg[red].sum()) / vol,
        matched_blue_rate=float(deg[~red].sum()) / vol,
        unmatched_red_rate=float(m.remaining[red].sum()) / vol,
        unmatched_blue_rate=float(m.remaining[~red].sum()) / vol,
        volume=vol,
    )


def hill_tail_index(values, top_fraction: float = 0.05) -> float:
    """Hill estimate of the tail index from the largest ``top_fraction`` of positive values."""
    x = np.sort(np.asarray(values, dtype=float)[np.asarray(values) > 0])[::-1]
    if x.size < 2:
        return math.nan
    k = min(max(1, int(top_fraction * x.size)), x.size - 1)
    gamma = float(np.mean(np.log(x[:k])) - math.log(x[k]))
    return math.inf if gamma == 0 else 1.0 / gamma


@dataclass
class EdgeLengthStats:
    per_point: np.ndarray = field(repr=False)
    mean: float
    red_mean: float
    blue_mean: float
    tail_index: float

    def to_dict(self) -> dict:
        return {"mean": self.mean, "red_mean": self.red_mean, "blue_mean": self.blue_mean,
                "tail_index": self.tail_index}


def total_edge_length(cfg: PointConfig, m: Matching) -> EdgeLengthStats:
    """Sum of incident edge lengths per point, with its mean and a Hill tail index."""
    t = np.zeros(cfg.n)
    e = m.edge_array()
    if e.size:
        length = cfg.distances(e[:, 0], e[:, 1])
        np.add.at(t, e[:, 0], length)
        np.add.at(t, e[:, 1], length)
    red = cfg.colors == Color.RED

    def avg(v):
        return float(v.mean()) if v.size else 0.0

    return EdgeLengthStats(t, avg(t), avg(t[red]), avg(t[~red]), hill_tail_index(t))


def adjacent_cube_reach(d: int) -> int:
    """Smallest integer m with every distance between points of face-adjacent unit cubes <= m.

    The farthest pair spans two sides along the shared axis and one side along
    the others, so m = ceil(sqrt(d + 3)).
    """
    m = math.isqrt(d + 3)
    return m if m * m == d + 3 else m + 1


@dataclass
class CubeLattice:
    side: float
    extent: int
    counts_red: np.ndarray = field(repr=False)
    counts_blue: np.ndarray = field(repr=False)
    acceptable: np.ndarray = field(repr=False)
    good: np.ndarray = field(repr=False)
    n: int
    m: int
    k: int
    percolates: bool
    largest_good_cluster: int
    metadata: dict = field(default_factory=dict)

    @property
    def acceptable_fraction(self) -> float:
        return float(self.acceptable.mean())

    @property
    def good_fraction(self) -> float:
        return float(self.good.mean())

    def to_dict(self) -> dict:
        return {"side": self.side, "extent": self.extent, "n": self.n, "m": self.m, "k": self.k,
                "acceptable_fraction": self.acceptable_fraction, "good_fraction": self.good_fraction,
                "percolates": self.percolates, "largest_good_cluster": self.largest_good_cluster,
                **self.metadata}


def _good_clusters(good: np.ndarray, torus: bool):
    """Face-connected clusters of good sites; returns (spanning, largest cluster size).

    On the torus a cluster spans when it wraps around some axis, detected by a
    union-find that carries each site's unwrapped offset to its root.
    """
    shape = good.shape
    d = good.ndim
    sites = np.flatnonzero(good.ravel())
    if sites.size == 0:
        return False, 0
    parent = {int(s): int(s) for s in sites}
    offset = {int(s): np.zeros(d, dtype=np.int64) for s in sites}
    size = {int(s): 1 for s in sites}
    wraps = set()

    def find(x):
        path = []
        while parent[x] != x:
            path.append(x)
            x = parent[x]
        acc = np.zeros(d, dtype=np.int64)
        for y in reversed(path):
            acc = acc + offset[y]
            offset[y] = acc.copy()
            parent[y] = x
        return x

    coords = np.array(np.unravel_index(sites, shape)).T
    for s, c in zip(sites.tolist(), coords):
        for axis in range(d):
            nc = c.copy()
            nc[axis] += 1
            if nc[axis] == shape[axis]:
                if not torus:
                    continue
                nc[axis] = 0
            t = int(np.ravel_multi_index(tuple(nc), shape))
            if t not in parent:
                continue
            step = np.zeros(d, dtype=np.int64)
            step[axis] = 1
            ra, rb = find(s), find(t)
            oa, ob = offset[s] if s != ra else 0, offset[t] if t != rb else 0
            delta = oa + step - ob
            if ra == rb:
                if np.any(delta != 0):
                    wraps.add(ra)
                continue
            if size[ra] < size[rb]:
                ra, rb, delta = rb, ra, -delta
            parent[rb] = ra
            offset[rb] = np.asarray(delta, dtype=np.int64)
            size[ra] += size[rb]
            if rb in wraps:
                wraps.add(ra)
    roots = {s: find(s) for s in parent}
    largest = max(Counter(roots.values()).values())
    if torus:
        return any(roots[r] == r and r in wraps for r in roots), largest
    label = {}
    for s, c in zip(sites.tolist(), coords):
        label.setdefault(roots[s], []).append(c)
    for cs in label.values():
        cs = np.array(cs)
        if any(cs[:, a].min() == 0 and cs[:, a].max() == shape[a] - 1 for a in range(d)):
            return True, largest
    return False, largest


def renormalize(cfg: PointConfig, a: float, n: int) -> CubeLattice:
    """Cube lattice of side ``a`` with acceptability (1..n points of each color)
    and goodness (all cubes within l-infinity lattice distance 2m acceptable)."""
    w = cfg.window
    if not a > 0 or a >= w.side:
        raise DomainError(f"cube side must lie in (0, {w.side}), got {a!r}")
    extent = max(1, int(round(w.side / a)))
    if abs(extent * a - w.side) > 1e-9 * w.side:
        warnings.warn(f"side {w.side} is not a multiple of {a}; using {w.side / extent}", stacklevel=2)
    a = w.side / extent
    d = w.dimension
    m = adjacent_cube_reach(d)
    k = n * (4 * m + 1) ** d
    shape = (extent,) * d
    cell = np.minimum((cfg.positions // a).astype(np.int64), extent - 1)
    counts = {}
    for color in Color:
        sel = cfg.colors == color
        c = np.zeros(shape, dtype=np.int64)
        if sel.any():
            np.add.at(c, tuple(cell[sel].T), 1)
        counts[color] = c
    acceptable = ((counts[Color.RED] >= 1) & (counts[Color.RED] <= n)
                  & (counts[Color.BLUE] >= 1) & (counts[Color.BLUE] <= n))
    good = ndimage.minimum_filter(acceptable.astype(np.uint8), size=4 * m + 1,
                                  mode="wrap" if w.torus else "constant", cval=0).astype(bool)
    percolates, largest = _good_clusters(good, w.torus)
    return CubeLattice(a, extent, counts[Color.RED], counts[Color.BLUE], acceptable, good,
                       n, m, k, percolates, largest,
                       {"adjacency": "face", "spanning": "wrap" if w.torus else "face-to-face"})
