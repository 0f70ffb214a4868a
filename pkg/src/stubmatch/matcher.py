"""Two-color stable multi-matching: the iterated mutually-closest rounds engine,
its shortest-pair-first equivalent, the stability verifier and an exhaustive oracle.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import MatchingError, SizeError, TieWarning
from .spatial import Color, PointConfig, SpatialIndex, check_non_equidistant, pair_distances

__all__ = [
    "Matching",
    "Restriction",
    "MatchReport",
    "run_2cimc",
    "run_greedy",
    "stable_matching",
    "verify_stable",
    "brute_force_stable",
    "match_report",
]

# exhaustive enumeration limit on red*blue candidate pairs
BRUTE_FORCE_MAX_PAIRS = 30
# tie scan is quadratic; skipped above this many points
TIE_CHECK_MAX_POINTS = 2000


@dataclass(frozen=True, eq=False)
class Matching:
    """Simple bipartite edge set; edges are ``(red_id, blue_id)`` tuples."""

    edges: frozenset
    remaining: np.ndarray

    def __post_init__(self):
        remaining = np.array(self.remaining, dtype=np.int64)
        remaining.setflags(write=False)
        object.__setattr__(self, "edges", frozenset((int(r), int(b)) for r, b in self.edges))
        object.__setattr__(self, "remaining", remaining)

    @classmethod
    def empty(cls, cfg: PointConfig) -> "Matching":
        return cls(frozenset(), cfg.stubs)

    @classmethod
    def from_edges(cls, cfg: PointConfig, edges: Iterable) -> "Matching":
        edges = frozenset(_orient(cfg, a, b) for a, b in edges)
        deg = _degrees(cfg.n, edges)
        m = cls(edges, cfg.stubs - deg)
        m.validate(cfg)
        return m

    def degree(self, n: Optional[int] = None) -> np.ndarray:
        return _degrees(self.remaining.size if n is None else n, self.edges)

    def edge_array(self) -> np.ndarray:
        if not self.edges:
            return np.empty((0, 2), dtype=np.int64)
        return np.array(sorted(self.edges), dtype=np.int64)

    def lengths(self, cfg: PointConfig) -> np.ndarray:
        e = self.edge_array()
        return cfg.distances(e[:, 0], e[:, 1])

    def validate(self, cfg: PointConfig) -> None:
        if self.remaining.shape != (cfg.n,):
            raise MatchingError(f"remaining has shape {self.remaining.shape}, expected ({cfg.n},)")
        for r, b in self.edges:
            if not (0 <= r < cfg.n and 0 <= b < cfg.n):
                raise MatchingError(f"edge ({r}, {b}) references a missing point")
            if cfg.colors[r] != Color.RED or cfg.colors[b] != Color.BLUE:
                raise MatchingError(f"edge ({r}, {b}) does not join a red and a blue point")
        deg = self.degree(cfg.n)
        if np.any(self.remaining < 0) or np.any(deg + self.remaining != cfg.stubs):
            bad = int(np.flatnonzero((deg + self.remaining != cfg.stubs) | (self.remaining < 0))[0])
            raise MatchingError(f"point {bad}: degree {deg[bad]} + remaining {self.remaining[bad]} "
                                f"!= stubs {cfg.stubs[bad]}")


def _degrees(n: int, edges) -> np.ndarray:
    deg = np.zeros(n, dtype=np.int64)
    if edges:
        e = np.array(list(edges), dtype=np.int64)
        np.add.at(deg, e.ravel(), 1)
    return deg


def _orient(cfg: PointConfig, a: int, b: int) -> tuple[int, int]:
    a, b = int(a), int(b)
    return (a, b) if cfg.colors[a] == Color.RED else (b, a)


@dataclass(frozen=True)
class Restriction:
    """Red-blue pairs that may not receive an edge."""

    forbidden: frozenset = field(default_factory=frozenset)

    @classmethod
    def from_pairs(cls, cfg: PointConfig, pairs: Iterable) -> "Restriction":
        r = cls(frozenset(_orient(cfg, a, b) for a, b in pairs))
        r.validate(cfg)
        return r

    def validate(self, cfg: PointConfig) -> None:
        for r, b in self.forbidden:
            if not (0 <= r < cfg.n and 0 <= b < cfg.n) or cfg.colors[r] != Color.RED \
                    or cfg.colors[b] != Color.BLUE:
                raise MatchingError(f"forbidden pair ({r}, {b}) is not a red-blue pair of the config")

    def by_point(self, n: int) -> list[set]:
        out = [set() for _ in range(n)]
        for r, b in self.forbidden:
            out[r].add(b)
            out[b].add(r)
        return out


def _prepare(cfg, restriction, capacity):
    restriction = restriction or Restriction()
    restriction.validate(cfg)
    if capacity is None:
        cap = cfg.stubs.copy()
    else:
        cap = np.array(capacity, dtype=np.int64)
        if cap.shape != (cfg.n,) or np.any(cap < 0) or np.any(cap > cfg.stubs):
            raise MatchingError("capacity must satisfy 0 <= capacity <= stubs pointwise")
    return restriction, cap


def _warn_ties(cfg: PointConfig) -> int:
    if cfg.n > TIE_CHECK_MAX_POINTS:
        return 0
    ok, witnesses = check_non_equidistant(cfg)
    if not ok:
        warnings.warn(f"{len(witnesses)} exact distance ties; broken by smaller point id",
                      TieWarning, stacklevel=3)
    return len(witnesses)


def run_2cimc(cfg: PointConfig, restriction: Optional[Restriction] = None, *,
              capacity=None, trace: Optional[list] = None, shadow: bool = False,
              index: Optional[SpatialIndex] = None) -> tuple[Matching, int]:
    """Iterated mutually closest matching in synchronous rounds.

    Every round links each red-blue pair that are each other's nearest eligible
    partner (both with a free stub, not yet adjacent, not forbidden) and removes
    one stub from each endpoint. ``capacity`` caps how many stubs per point may
    be used (defaults to all). Returns the matching and the number of rounds
    that created edges. If ``trace`` is a list, the total of unused capacity is
    appended after every round. ``shadow`` recomputes every nearest-partner
    lookup by brute force and by ring search and raises AssertionError on any
    disagreement.
    """
    restriction, cap = _prepare(cfg, restriction, capacity)
    _warn_ties(cfg)
    n = cfg.n
    idx = index if index is not None else SpatialIndex(cfg)
    forb = restriction.by_point(n)
    adj: list[set] = [set() for _ in range(n)]
    colors = cfg.colors
    opposite = {Color.RED: colors == Color.BLUE, Color.BLUE: colors == Color.RED}
    diameter = cfg.window.diameter
    r0 = 2.0 * idx.h

    # candidate lists sorted by (distance, id); eligibility only ever shrinks,
    # so a point's pointer never needs to move backwards
    cand: list = [None] * n
    ptr = [0] * n
    radius = [0.0] * n

    def eligible(p: int, q: int) -> bool:
        return cap[q] > 0 and q not in adj[p] and q not in forb[p]

    def choice(p: int) -> Optional[int]:
        while True:
            ids = cand[p]
            if ids is not None:
                i = ptr[p]
                while i < len(ids):
                    q = ids[i]
                    if eligible(p, q):
                        ptr[p] = i
                        return q
                    i += 1
                ptr[p] = i
                if radius[p] >= diameter:
                    return None
            new_r = r0 if ids is None else 2.0 * radius[p]
            if new_r >= diameter:
                new_r = math.inf
            got, dist = idx.within(p, new_r, opposite[Color(colors[p])])
            if ids is not None:
                keep = dist > radius[p]
                got = got[keep]
            cand[p] = got.tolist()
            ptr[p] = 0
            radius[p] = new_r

    def brute(p: int) -> Optional[int]:
        mask = opposite[Color(colors[p])] & (cap > 0)
        mask[list(adj[p] | forb[p])] = False
        qs = np.flatnonzero(mask)
        if qs.size == 0:
            return None
        dist = pair_distances(cfg.window, cfg.positions[qs], cfg.positions[p])
        return int(qs[np.lexsort((qs, dist))[0]])

    active = [p for p in range(n) if cap[p] > 0]
    rounds = 0
    while active:
        choices = {}
        for p in active:
            q = choice(p)
            if shadow:
                expect = brute(p)
                ring = idx.nearest(p, lambda x, p=p: eligible(p, x))
                if not (q == expect == ring):
                    raise AssertionError(f"nearest partner of {p}: cached {q}, brute {expect}, ring {ring}")
            if q is not None:
                choices[p] = q
        linked = [(p, q) for p, q in choices.items()
                  if colors[p] == Color.RED and choices.get(q) == p]
        if not linked:
            break
        rounds += 1
        for r, b in linked:
            adj[r].add(b)
            adj[b].add(r)
            cap[r] -= 1
            cap[b] -= 1
        active = [p for p in choices if cap[p] > 0]
        if trace is not None:
            trace.append(int(cap.sum()))

    edges = frozenset((r, b) for r in range(n) if colors[r] == Color.RED for b in adj[r])
    return Matching(edges, cfg.stubs - _degrees(n, edges)), rounds


def _initial_radius(cfg: PointConfig, cap: np.ndarray) -> float:
    w = cfg.window
    d = w.dimension
    density = max(cfg.n, 1) / w.volume
    unit_ball = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
    target = 2.0 * float(cap.mean()) + 2.0 if cap.size else 2.0
    return (target / (density * unit_ball)) ** (1.0 / d)


def _greedy_edges(cfg: PointConfig, cap: np.ndarray, forbidden: frozenset) -> list:
    """Shortest eligible pair first, in (distance, red id, blue id) order.

    Candidate pairs are enumerated in distance shells (r_prev, r] of doubling
    radius among points that still have capacity; pairs whose endpoint ran
    out of capacity never become eligible again, so the global order is kept.
    """
    w = cfg.window
    pos = cfg.positions
    boxsize = w.side if w.torus else None
    red_all, blue_all = cfg.red, cfg.blue
    edges = []
    r = _initial_radius(cfg, cap)
    r_prev = -1.0
    while True:
        ra = red_all[cap[red_all] > 0]
        ba = blue_all[cap[blue_all] > 0]
        if ra.size == 0 or ba.size == 0:
            break
        last = r >= w.diameter
        query_r = w.diameter * (1 + 1e-9) + 1e-12 if last else r * (1 + 1e-9) + 1e-12
        tr = cKDTree(pos[ra], boxsize=boxsize)
        tb = cKDTree(pos[ba], boxsize=boxsize)
        found = tr.sparse_distance_matrix(tb, query_r, output_type="ndarray")
        ri = ra[found["i"]]
        bi = ba[found["j"]]
        dist = pair_distances(w, pos[ri], pos[bi])
        keep = dist > r_prev
        if not last:
            keep &= dist <= r
        ri, bi, dist = ri[keep], bi[keep], dist[keep]
        for t in np.lexsort((bi, ri, dist)):
            a, b = int(ri[t]), int(bi[t])
            if cap[a] > 0 and cap[b] > 0 and (a, b) not in forbidden:
                edges.append((a, b))
                cap[a] -= 1
                cap[b] -= 1
        if last:
            break
        r_prev, r = r, 2.0 * r
    return edges


def run_greedy(cfg: PointConfig, restriction: Optional[Restriction] = None, *,
               capacity=None) -> Matching:
    """Repeatedly link the globally shortest eligible red-blue pair."""
    restriction, cap = _prepare(cfg, restriction, capacity)
    _warn_ties(cfg)
    edges = frozenset(_greedy_edges(cfg, cap, restriction.forbidden))
    return Matching(edges, cfg.stubs - _degrees(cfg.n, edges))


def stable_matching(cfg: PointConfig, restriction: Optional[Restriction] = None, *,
                    capacity=None, engine: str = "greedy") -> Matching:
    if engine == "greedy":
        return run_greedy(cfg, restriction, capacity=capacity)
    if engine == "rounds":
        return run_2cimc(cfg, restriction, capacity=capacity)[0]
    raise ValueError(f"unknown engine {engine!r}")


def verify_stable(cfg: PointConfig, m: Matching, restriction: Optional[Restriction] = None):
    """Exhaustive stability check, returns ``(stable, unstable_pairs)``.

    A red-blue pair is unstable when it is neither linked nor forbidden and
    each endpoint has a free stub or an incident edge strictly longer than
    the pair's distance.
    """
    m.validate(cfg)
    restriction = restriction or Restriction()
    restriction.validate(cfg)
    n = cfg.n
    longest = np.zeros(n)
    e = m.edge_array()
    if e.size:
        length = cfg.distances(e[:, 0], e[:, 1])
        np.maximum.at(longest, e[:, 0], length)
        np.maximum.at(longest, e[:, 1], length)
    slack = np.where(m.remaining > 0, np.inf, longest)
    red, blue = cfg.red, cfg.blue
    unstable = []
    chunk = max(1, 2_000_000 // max(blue.size, 1))
    for s in range(0, red.size, chunk):
        rs = red[s:s + chunk]
        dist = pair_distances(cfg.window, cfg.positions[rs][:, None, :], cfg.positions[blue][None, :, :])
        bad = (dist < slack[rs][:, None]) & (dist < slack[blue][None, :])
        for i, j in zip(*np.nonzero(bad)):
            pair = (int(rs[i]), int(blue[j]))
            if pair not in m.edges and pair not in restriction.forbidden:
                unstable.append(pair)
    return not unstable, unstable


def brute_force_stable(cfg: PointConfig, restriction: Optional[Restriction] = None, *,
                       capacity=None) -> list[Matching]:
    """Every stable matching, by enumerating all degree-feasible edge sets.

    Exponential in the number of red-blue pairs; refuses more than 30.
    """
    restriction, cap = _prepare(cfg, restriction, capacity)
    red, blue = cfg.red, cfg.blue
    if red.size * blue.size > BRUTE_FORCE_MAX_PAIRS:
        raise SizeError(f"{red.size}x{blue.size} pairs exceed the enumeration limit {BRUTE_FORCE_MAX_PAIRS}")
    pairs = [(int(r), int(b)) for r in red for b in blue]
    free = [t for t, p in enumerate(pairs) if p not in restriction.forbidden]
    nbits = len(free)
    bit_pairs = [pairs[t] for t in free]
    dist = np.array([float(cfg.distances(r, b)) for r, b in bit_pairs])
    touching = {}
    for k, (r, b) in enumerate(bit_pairs):
        touching[r] = touching.get(r, 0) | (1 << k)
        touching[b] = touching.get(b, 0) | (1 << k)
    longer = {}
    for k, (r, b) in enumerate(bit_pairs):
        for v in (r, b):
            longer[k, v] = sum(1 << t for t, (rr, bb) in enumerate(bit_pairs)
                               if v in (rr, bb) and dist[t] > dist[k])
    found = []
    chunk = 1 << 20
    for start in range(0, 1 << nbits, chunk):
        masks = np.arange(start, min(start + chunk, 1 << nbits), dtype=np.uint64)
        deg = {}
        ok = np.ones(masks.size, dtype=bool)
        for v, vm in touching.items():
            deg[v] = np.bitwise_count(masks & np.uint64(vm)).astype(np.int64)
            ok &= deg[v] <= cap[v]
        masks = masks[ok]
        deg = {v: dv[ok] for v, dv in deg.items()}
        stable = np.ones(masks.size, dtype=bool)
        for k, (r, b) in enumerate(bit_pairs):
            unlinked = (masks >> np.uint64(k)) & np.uint64(1) == 0
            want_r = (deg[r] < cap[r]) | ((masks & np.uint64(longer[k, r])) != 0)
            want_b = (deg[b] < cap[b]) | ((masks & np.uint64(longer[k, b])) != 0)
            stable &= ~(unlinked & want_r & want_b)
        found.extend(int(x) for x in masks[stable])

    out = []
    for mask in found:
        edges = frozenset(bit_pairs[k] for k in range(nbits) if mask >> k & 1)
        out.append(Matching(edges, cfg.stubs - _degrees(cfg.n, edges)))
    return out


@dataclass(frozen=True)
class MatchReport:
    matched_red_stubs: int
    matched_blue_stubs: int
    unmatched_red_stubs: int
    unmatched_blue_stubs: int
    edge_count: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @property
    def saturated(self) -> str:
        """Which color has no unmatched stubs left."""
        if self.unmatched_red_stubs == 0 and self.unmatched_blue_stubs == 0:
            return "both"
        if self.unmatched_red_stubs == 0:
            return "red"
        if self.unmatched_blue_stubs == 0:
            return "blue"
        return "none"


def match_report(cfg: PointConfig, m: Matching) -> MatchReport:
    red = cfg.colors == Color.RED
    deg = m.degree(cfg.n)
    return MatchReport(
        matched_red_stubs=int(deg[red].sum()),
        matched_blue_stubs=int(deg[~red].sum()),
        unmatched_red_stubs=int(m.remaining[red].sum()),
        unmatched_blue_stubs=int(m.remaining[~red].sum()),
        edge_count=len(m.edges),
    )
