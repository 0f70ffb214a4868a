"""Window geometry, marked two-color point configurations and grid neighbor queries."""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Optional

import numpy as np

from .errors import DomainError

__all__ = [
    "Boundary",
    "Color",
    "Window",
    "PointConfig",
    "SpatialIndex",
    "distance",
    "pair_distances",
    "nearest_compatible",
    "check_non_equidistant",
]


class Boundary(str, enum.Enum):
    TORUS = "torus"
    BOX = "box"


class Color(enum.IntEnum):
    RED = 0
    BLUE = 1

    @property
    def other(self) -> "Color":
        return Color(1 - self.value)

    @classmethod
    def parse(cls, value) -> "Color":
        if isinstance(value, str):
            try:
                return cls[value.strip().upper()]
            except KeyError:
                raise DomainError(f"unknown color {value!r}") from None
        return cls(int(value))


@dataclass(frozen=True)
class Window:
    """The simulation window ``[0, side)^dimension``, periodic or not."""

    dimension: int
    side: float
    boundary: Boundary = Boundary.TORUS

    def __post_init__(self):
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise DomainError(f"dimension must be a positive integer, got {self.dimension!r}")
        if not (self.side > 0 and math.isfinite(self.side)):
            raise DomainError(f"side must be positive and finite, got {self.side!r}")
        object.__setattr__(self, "dimension", int(self.dimension))
        object.__setattr__(self, "side", float(self.side))
        object.__setattr__(self, "boundary", Boundary(self.boundary))

    @property
    def torus(self) -> bool:
        return self.boundary is Boundary.TORUS

    @property
    def volume(self) -> float:
        return self.side ** self.dimension

    @property
    def diameter(self) -> float:
        """Largest distance two points of the window can have."""
        span = self.side / 2 if self.torus else self.side
        return span * math.sqrt(self.dimension)

    def contains(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, self.dimension)
        return np.all((pts >= 0.0) & (pts < self.side), axis=1)

    def to_dict(self) -> dict:
        return {"dimension": self.dimension, "side": self.side, "boundary": self.boundary.value}

    @classmethod
    def from_dict(cls, data: dict) -> "Window":
        return cls(int(data["dimension"]), float(data["side"]), Boundary(data.get("boundary", "torus")))


def pair_distances(window: Window, a, b) -> np.ndarray:
    """Elementwise distance between broadcastable arrays of points (last axis = coordinates).

    Every distance in the package goes through this function so that equal
    geometric situations always produce bit-identical floating values.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    diff = np.abs(a - b)
    if window.torus:
        diff = np.minimum(diff, window.side - diff)
    sq = diff[..., 0] * diff[..., 0]
    for k in range(1, window.dimension):
        sq = sq + diff[..., k] * diff[..., k]
    return np.sqrt(sq)


def distance(window: Window, x, y) -> float:
    x = np.asarray(x, dtype=float).reshape(window.dimension)
    y = np.asarray(y, dtype=float).reshape(window.dimension)
    if not (window.contains(x)[0] and window.contains(y)[0]):
        raise DomainError(f"points {x.tolist()} / {y.tolist()} not inside [0, {window.side})^{window.dimension}")
    return float(pair_distances(window, x, y))


@dataclass(frozen=True, eq=False)
class PointConfig:
    """A finite marked two-color configuration. Point ids are the row indices."""

    window: Window
    positions: np.ndarray
    colors: np.ndarray
    stubs: np.ndarray

    def __post_init__(self):
        d = self.window.dimension
        pos = np.array(self.positions, dtype=float).reshape(-1, d)
        colors = np.asarray(self.colors)
        if colors.dtype.kind in "OUS":
            colors = np.array([Color.parse(c) for c in colors.reshape(-1)])
        colors = np.array(colors, dtype=np.int8).reshape(-1)
        stubs = np.array(self.stubs, dtype=np.int64).reshape(-1)
        n = pos.shape[0]
        if colors.shape[0] != n or stubs.shape[0] != n:
            raise DomainError("positions, colors and stubs must have the same length")
        if n and not np.all(self.window.contains(pos)):
            bad = int(np.flatnonzero(~self.window.contains(pos))[0])
            raise DomainError(f"point {bad} at {pos[bad].tolist()} lies outside the window")
        if n and not np.all((colors == Color.RED) | (colors == Color.BLUE)):
            raise DomainError("colors must be RED (0) or BLUE (1)")
        if n and stubs.min() < 1:
            raise DomainError("every point needs at least one stub")
        for arr in (pos, colors, stubs):
            arr.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "colors", colors)
        object.__setattr__(self, "stubs", stubs)

    @classmethod
    def from_points(cls, window: Window, records: Iterable) -> "PointConfig":
        """Build from ``(position, color, stubs)`` triples; ids follow input order."""
        records = list(records)
        d = window.dimension
        if not records:
            return cls(window, np.empty((0, d)), np.empty(0, np.int8), np.empty(0, np.int64))
        pos, col, st = zip(*records)
        return cls(window, np.array(pos, dtype=float).reshape(-1, d),
                   np.array([Color.parse(c) for c in col], dtype=np.int8), np.array(st))

    @property
    def n(self) -> int:
        return int(self.positions.shape[0])

    def ids(self, color: Color) -> np.ndarray:
        return np.flatnonzero(self.colors == color)

    @property
    def red(self) -> np.ndarray:
        return self.ids(Color.RED)

    @property
    def blue(self) -> np.ndarray:
        return self.ids(Color.BLUE)

    def total_stubs(self, color: Color) -> int:
        return int(self.stubs[self.colors == color].sum())

    def with_stubs(self, stubs) -> "PointConfig":
        return PointConfig(self.window, self.positions, self.colors, stubs)

    def shifted(self, shift) -> "PointConfig":
        """Translate every point by ``shift`` modulo the side (torus only)."""
        if not self.window.torus:
            raise DomainError("translations are only defined on the torus")
        pos = np.mod(self.positions + np.asarray(shift, dtype=float), self.window.side)
        pos[pos >= self.window.side] = 0.0
        return PointConfig(self.window, pos, self.colors, self.stubs)

    def distances(self, i, j) -> np.ndarray:
        return pair_distances(self.window, self.positions[i], self.positions[j])


class SpatialIndex:
    """Uniform grid over the window with per-cell buckets of point ids.

    The cell side only changes performance: every query returns exactly what a
    linear scan would.
    """

    def __init__(self, cfg: PointConfig, cell_side: Optional[float] = None):
        w = cfg.window
        self.cfg = cfg
        self.window = w
        d = w.dimension
        if cell_side is None:
            # (lambda_red + lambda_blue)^(-1/d), estimated from the sample
            cell_side = w.side / max(cfg.n, 1) ** (1.0 / d)
        ncell = max(1, int(w.side // cell_side))
        # keep the grid no larger than a few cells per point
        while ncell > 1 and ncell ** d > 4 * max(cfg.n, 1):
            ncell -= 1
        self.ncell = ncell
        self.h = w.side / ncell
        coords = np.minimum((cfg.positions // self.h).astype(np.int64), ncell - 1)
        self._coords = coords
        flat = np.ravel_multi_index(coords.T, (ncell,) * d) if cfg.n else np.empty(0, np.int64)
        self._flat = flat
        self._order = np.argsort(flat, kind="stable")
        bounds = np.searchsorted(flat[self._order], np.arange(ncell ** d + 1))
        self._start = bounds

    def _bucket(self, cell: int) -> np.ndarray:
        return self._order[self._start[cell]:self._start[cell + 1]]

    def _axis_cells(self, c: int, k: int) -> list[int]:
        n = self.ncell
        if self.window.torus:
            if 2 * k + 1 >= n:
                return list(range(n))
            return [(c + o) % n for o in range(-k, k + 1)]
        return list(range(max(0, c - k), min(n, c + k + 1)))

    def within(self, p: int, radius: float, mask: Optional[np.ndarray] = None):
        """Ids (other than ``p``) at distance <= radius, sorted by (distance, id)."""
        cfg = self.cfg
        if radius >= self.window.diameter:
            axes = None
        else:
            k = int(radius // self.h) + 1
            axes = [self._axis_cells(int(c), k) for c in self._coords[p]]
        if axes is None or all(len(a) == self.ncell for a in axes):
            cand = np.arange(cfg.n)
        else:
            grid = np.meshgrid(*axes, indexing="ij")
            cells = np.ravel_multi_index([g.ravel() for g in grid], (self.ncell,) * self.window.dimension)
            cand = np.concatenate([self._bucket(int(c)) for c in cells])
        cand = cand[cand != p]
        if mask is not None:
            cand = cand[mask[cand]]
        dist = pair_distances(self.window, cfg.positions[cand], cfg.positions[p])
        keep = dist <= radius
        cand, dist = cand[keep], dist[keep]
        order = np.lexsort((cand, dist))
        return cand[order], dist[order]

    def _ring(self, k: int) -> np.ndarray:
        """Offsets at l-infinity distance exactly k, shape (m, d)."""
        return _ring_offsets(k, self.window.dimension)

    def _gather(self, cells: np.ndarray) -> np.ndarray:
        starts, ends = self._start[cells], self._start[cells + 1]
        lengths = ends - starts
        if lengths.sum() == 0:
            return np.empty(0, dtype=np.int64)
        shift = np.repeat(starts - np.cumsum(lengths) + lengths, lengths)
        return self._order[np.arange(lengths.sum()) + shift]

    def nearest(self, p: int, eligible: Optional[Callable[[int], bool]] = None,
                color: Optional[Color] = None) -> Optional[int]:
        """Nearest point of ``color`` (default: opposite of p) passing ``eligible``.

        Ring-by-ring search over grid cells; ties go to the smaller id.
        """
        cfg = self.cfg
        if color is None:
            color = Color(cfg.colors[p]).other
        n, d = self.ncell, self.window.dimension
        shape = (n,) * d
        visited = np.zeros(n ** d, dtype=bool)
        home = self._coords[p]
        best, best_d = None, math.inf
        k = 0
        while True:
            idx = home + self._ring(k)
            if self.window.torus:
                idx %= n
            else:
                idx = idx[np.all((idx >= 0) & (idx < n), axis=1)]
            cells = np.unique(np.ravel_multi_index(idx.T, shape)) if idx.size else idx[:, 0]
            cells = cells[~visited[cells]]
            visited[cells] = True
            ids = self._gather(cells)
            ids = ids[(cfg.colors[ids] == color) & (ids != p)]
            if ids.size:
                dist = pair_distances(self.window, cfg.positions[ids], cfg.positions[p])
                for j in np.lexsort((ids, dist)):
                    q, dq = int(ids[j]), float(dist[j])
                    if (dq, q) >= (best_d, best if best is not None else -1):
                        break
                    if eligible is None or eligible(q):
                        best, best_d = q, dq
                        break
            # unvisited cells lie at least k * h away
            if best is not None and best_d < k * self.h:
                break
            if visited.all() or (not self.window.torus and k > n):
                break
            k += 1
        return best


@lru_cache(maxsize=None)
def _ring_offsets(k: int, d: int) -> np.ndarray:
    if k == 0:
        return np.zeros((1, d), dtype=np.int64)
    grid = np.array(list(itertools.product(range(-k, k + 1), repeat=d)), dtype=np.int64)
    return grid[np.abs(grid).max(axis=1) == k]


def nearest_compatible(cfg: PointConfig, idx: SpatialIndex, p: int,
                       eligible: Optional[Callable[[int], bool]] = None) -> Optional[int]:
    """Closest opposite-colored point to ``p`` accepted by ``eligible``, or None."""
    if not 0 <= p < cfg.n:
        raise DomainError(f"no point with id {p}")
    return idx.nearest(p, eligible)


def check_non_equidistant(cfg: PointConfig):
    """Return ``(ok, witnesses)``; each witness ``(i, j, k, l)`` has |x_i-x_j| == |x_k-x_l|.

    Exact equality of the computed doubles; O(n^2) memory.
    """
    n = cfg.n
    if n < 3:
        return True, []
    i, j = np.triu_indices(n, 1)
    dist = cfg.distances(i, j)
    order = np.argsort(dist, kind="stable")
    ds = dist[order]
    witnesses = []
    for t in np.flatnonzero(ds[1:] == ds[:-1]):
        a, b = order[t], order[t + 1]
        witnesses.append((int(i[a]), int(j[a]), int(i[b]), int(j[b])))
    return not witnesses, witnesses
