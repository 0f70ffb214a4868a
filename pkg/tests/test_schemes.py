import numpy as np
import pytest

from stubmatch import (Color, Deterministic, Geometric, PointConfig, Restriction, SimParams, UnsupportedCase,
                       Window, Zipf, alternating_truncation, choose_truncations, components,
                       finite_component_scheme, match_report, percolating_scheme, run_greedy,
                       sample_config, stable_matching, verify_stable)
from stubmatch.schemes import type_thresholds

# seeds found by rejection sampling: equal color counts and no leftovers
BALANCED_DET2 = SimParams(Window(2, 3.5), 1.0, 1.0, Deterministic(2), Deterministic(2), seed=277)
BALANCED_DET1 = SimParams(Window(2, 3.0), 1.0, 1.0, Deterministic(1), Deterministic(1), seed=14)


def groups_are_complete(cfg, res, n):
    for group in res.groups:
        reds = [p for p in group if cfg.colors[p] == Color.RED]
        blues = [p for p in group if cfg.colors[p] == Color.BLUE]
        if not (len(reds) == len(blues) == n):
            return False
        if not {(r, b) for r in reds for b in blues} <= res.matching.edges:
            return False
    return True


def test_finite_scheme_balanced_k22():
    cfg = sample_config(BALANCED_DET2)
    assert (cfg.colors == 0).sum() == (cfg.colors == 1).sum() == 12
    res = finite_component_scheme(cfg)
    assert len(res.groups) == 6 and all(len(g) == 4 for g in res.groups)
    assert not res.leftovers
    assert groups_are_complete(cfg, res, 2)
    assert np.all(res.matching.degree(cfg.n) == 2)
    assert components(cfg, res.matching).histogram == {4: 6}


def test_finite_scheme_degree_one_is_perfect_matching():
    cfg = sample_config(BALANCED_DET1)
    res = finite_component_scheme(cfg)
    assert all(len(g) == 2 for g in res.groups)
    assert len(res.matching.edges) == cfg.n // 2
    assert np.all(res.matching.degree(cfg.n) == 1)


def test_finite_scheme_reports_leftovers_and_respects_stubs():
    params = SimParams(Window(2, 15.0), 1.0, 1.0, Geometric(0.5), Geometric(0.5), seed=3)
    cfg = sample_config(params)
    res = finite_component_scheme(cfg, params.red_law, params.blue_law)
    grouped = {p for g in res.groups for p in g}
    assert grouped.isdisjoint(res.leftovers)
    assert grouped | set(res.leftovers) == set(range(cfg.n))
    assert np.all(res.matching.degree(cfg.n) <= cfg.stubs)
    deg = res.matching.degree(cfg.n)
    assert np.all(deg[list(res.leftovers)] == 0)
    for g in res.groups:
        n = int(cfg.stubs[g[0]])
        assert len(g) == 2 * n and all(cfg.stubs[p] == n for p in g)
    comp = components(cfg, res.matching)
    assert all(size == 1 or size % 2 == 0 for size in comp.histogram)


def test_finite_scheme_is_a_factor():
    cfg = sample_config(BALANCED_DET2)
    assert finite_component_scheme(cfg).matching.edges == finite_component_scheme(cfg).matching.edges


def test_finite_scheme_rejects_asymmetric_laws():
    cfg = sample_config(BALANCED_DET2)
    with pytest.raises(UnsupportedCase):
        finite_component_scheme(cfg, Deterministic(2), Deterministic(3))


def test_type_thresholds_split_evenly():
    d = np.arange(1, 13, dtype=float)
    t = type_thresholds(d, 3)
    assert list(t) == [4.0, 8.0]
    types = np.searchsorted(t, d, side="left") + 1
    assert np.bincount(types)[1:].tolist() == [4, 4, 4]


def line(points):
    return PointConfig.from_points(Window(1, 30.0, "box"), [((x,), c, s) for x, c, s in points])


def test_percolating_hand_traced_path():
    # reds 0,1,2 and blues 3,4,5; nearest pairs (0,3), (1,4), (2,5); the blues form a chain
    cfg = line([(0.0, "red", 2), (10.3, "red", 2), (20.7, "red", 2),
                (1.1, "blue", 2), (11.5, "blue", 2), (22.1, "blue", 2)])
    res = percolating_scheme(cfg)
    assert res.path == [0, 3, 1, 4, 2, 5]
    assert sorted(res.path_edges) == [(0, 3), (1, 3), (1, 4), (2, 4), (2, 5)]
    assert res.matching.edges == {(0, 3), (1, 3), (1, 4), (2, 4), (2, 5), (0, 5)}
    comp = components(cfg, res.matching)
    assert comp.histogram == {6: 1} and comp.cycles == 1
    assert res.metadata["tree"] == "euclidean-mst-dfs"


def test_percolating_children_ordered_by_distance():
    # blue 3 is the root; its tree children are blue 4 (distance 1) and blue 5 (distance 2)
    cfg = PointConfig.from_points(Window(2, 20.0, "box"), [
        ((10.0, 9.5), "red", 2), ((11.1, 9.4), "red", 2), ((7.9, 9.7), "red", 2),
        ((10.0, 10.0), "blue", 2), ((11.0, 10.0), "blue", 2), ((8.0, 10.0), "blue", 2)])
    res = percolating_scheme(cfg)
    blues = [p for p in res.path if cfg.colors[p] == Color.BLUE]
    assert blues == [3, 4, 5]
    assert all(cfg.colors[a] != cfg.colors[b] for a, b in zip(res.path, res.path[1:]))


def test_percolating_sampled_structure_and_negative_control():
    params = SimParams(Window(2, 30.0), 1.0, 1.0, Deterministic(3), Deterministic(3), seed=8)
    cfg = sample_config(params)
    res = percolating_scheme(cfg)
    assert len(set(res.path)) == len(res.path)
    assert all(cfg.colors[a] != cfg.colors[b] for a, b in zip(res.path, res.path[1:]))
    comp = components(cfg, res.matching)
    labels = comp.labels[res.path]
    assert np.unique(labels).size == 1
    assert np.bincount(comp.labels)[labels[0]] == comp.largest
    assert np.all(res.matching.degree(cfg.n) <= cfg.stubs)
    rest = res.matching.edges - set(res.path_edges)
    again = stable_matching(cfg, Restriction.from_pairs(cfg, res.path_edges), capacity=res.allowance)
    assert again.edges == rest
    assert not verify_stable(cfg, res.matching)[0]
    assert res.matching.edges != run_greedy(cfg).edges


def test_percolating_partial_cover_of_smaller_color():
    params = SimParams(Window(2, 12.0), 1.0, 2.0, Deterministic(2), Deterministic(2), seed=2)
    cfg = sample_config(params)
    res = percolating_scheme(cfg)
    on_path = set(res.path)
    red2 = {int(p) for p in np.flatnonzero((cfg.colors == Color.RED) & (cfg.stubs >= 2))}
    assert res.metadata["lower_color"] == "red"
    assert red2 <= on_path
    assert sum(1 for p in res.path if cfg.colors[p] == Color.RED) == len(red2)


def test_percolating_rejects_too_few_multi_stub_points():
    cfg = line([(0.0, "red", 1), (1.0, "blue", 2), (2.0, "red", 2), (3.0, "blue", 2)])
    with pytest.raises(UnsupportedCase):
        percolating_scheme(cfg)


def test_truncation_single_stage_equals_plain_matching():
    params = SimParams(Window(2, 10.0), 1.0, 1.0, Deterministic(1), Deterministic(1), seed=4)
    cfg = sample_config(params)
    res = alternating_truncation(cfg, [(2, 2)])
    assert res.matching.edges == run_greedy(cfg).edges


def test_truncation_stages_disjoint_fair_and_monotone():
    law = Zipf(2.0)
    cfg = sample_config(SimParams(Window(2, 12.0), 1.0, 1.0, law, law, seed=6))
    caps = choose_truncations(law, law, 1.0, 1.0, 3)
    assert caps == [(2, 2), (3, 3), (4, 4)]
    res = alternating_truncation(cfg, caps)
    seen = set()
    full_before = set()
    deg = np.zeros(cfg.n, dtype=np.int64)
    red = cfg.colors == Color.RED
    for stage, edges in zip(res.stages, res.stage_edges):
        assert seen.isdisjoint(edges)
        seen |= edges
        for r, b in edges:
            deg[r] += 1
            deg[b] += 1
        assert deg[red].sum() == deg[~red].sum() == len(seen)
        assert stage.edges_added == len(edges)
        full = set(np.flatnonzero(deg == cfg.stubs).tolist())
        assert full_before <= full
        full_before = full
        limit = np.where(red, np.minimum(cfg.stubs, stage.cap_red), np.minimum(cfg.stubs, stage.cap_blue))
        assert np.all(deg <= limit)
        mask = red if stage.designated_color == "red" else ~red
        assert set(np.flatnonzero(mask & (deg < limit)).tolist()) == set(stage.leftover_points)
    assert seen == res.matching.edges
    rep = match_report(cfg, res.matching)
    assert rep.matched_red_stubs == rep.matched_blue_stubs == rep.edge_count
    assert [s.designated_color for s in res.stages] == ["red", "blue", "red"]
    assert set(res.stages[0].to_dict()) >= {"stage", "cap_red", "cap_blue", "saturated_color", "edges_added"}
