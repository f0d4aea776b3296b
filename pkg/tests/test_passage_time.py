"""Restricted passage times, the rescaled box pseudometric, and path helpers."""

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fpplab.model import EdgeDistribution, LatticeBox, sample_weights
from fpplab.passage_time import (
    ContinuousMetric,
    DiscretePath,
    continuous_metric,
    disjoint_paths,
    geodesic_length_stats,
    hub_check,
    path_time,
    rescaled_metric,
    restricted_passage_time,
    uniform_gap,
)


def _det_field(d, n, value=1.0):
    return sample_weights(EdgeDistribution.deterministic(value), LatticeBox(d, n), 0)


# ---------------------------------------------------------------------------
# shortest-path engine
# ---------------------------------------------------------------------------


def test_deterministic_weights_give_l1_times():
    field = _det_field(2, 5)
    for x, y in [((0, 0), (5, 5)), ((1, 2), (4, 0)), ((3, 3), (3, 3))]:
        want = abs(x[0] - y[0]) + abs(x[1] - y[1])
        assert restricted_passage_time(field, x, y) == want


def test_heap_and_dial_engines_agree():
    tp = EdgeDistribution.two_point(1, 3, Fraction(1, 2))
    field = sample_weights(tp, LatticeBox(2, 6), 9)
    pairs = [((0, 0), (6, 6)), ((0, 3), (6, 3)), ((2, 1), (4, 5))]
    for x, y in pairs:
        th = restricted_passage_time(field, x, y, method="heap")
        td = restricted_passage_time(field, x, y, method="dial")
        assert th == td


def test_dial_rejects_fractional_weights():
    field = sample_weights(EdgeDistribution.uniform(0.5, 1.5), LatticeBox(2, 3), 0)
    with pytest.raises(ValueError):
        restricted_passage_time(field, (0, 0), (3, 3), method="dial")


def test_geodesic_is_consistent_with_time():
    tp = EdgeDistribution.two_point(1, 4, Fraction(1, 3))
    field = sample_weights(tp, LatticeBox(2, 5), 3)
    t, path = restricted_passage_time(field, (0, 0), (5, 5), return_path=True)
    assert isinstance(path, DiscretePath)
    assert path.endpoints() == ((0, 0), (5, 5))
    assert path.is_vertex_self_avoiding()
    assert path_time(path, field) == t


def test_region_restriction_lengthens_or_disconnects():
    field = _det_field(2, 4)
    free = restricted_passage_time(field, (0, 0), (4, 0))
    strip = restricted_passage_time(field, (0, 0), (4, 0), region=((0, 4), (0, 0)))
    assert strip == free == 4.0  # the straight path lies inside the strip
    # keeping only the endpoints leaves nothing to walk on
    cut, path = restricted_passage_time(
        field, (0, 0), (4, 0), region=[(0, 0), (4, 0)], return_path=True)
    assert math.isinf(cut)
    assert path is None


def test_region_must_contain_endpoints():
    field = _det_field(2, 4)
    with pytest.raises(ValueError):
        restricted_passage_time(field, (0, 0), (4, 4), region=((0, 2), (0, 2)))


def test_explicit_region_detour():
    """Knock out the middle of the box and force the geodesic around it."""
    field = _det_field(2, 2)
    region = [(x, y) for x in range(3) for y in range(3) if (x, y) != (1, 1)]
    t = restricted_passage_time(field, (1, 0), (1, 2), region=region)
    assert t == 4.0


@given(st.integers(0, 4), st.integers(0, 4), st.integers(0, 4), st.integers(0, 4))
@settings(max_examples=40, deadline=None)
def test_passage_time_symmetry_random_field(x0, y0, x1, y1):
    tp = EdgeDistribution.two_point(1, 2, Fraction(1, 2))
    field = sample_weights(tp, LatticeBox(2, 4), 7)
    a = restricted_passage_time(field, (x0, y0), (x1, y1))
    b = restricted_passage_time(field, (x1, y1), (x0, y0))
    assert a == b


# ---------------------------------------------------------------------------
# rescaled pseudometric
# ---------------------------------------------------------------------------


def test_rescaled_metric_matches_l1_over_n():
    field = _det_field(2, 8)
    rm = rescaled_metric(field)
    pts = rm.points
    l1 = np.abs(pts[:, None, :] - pts[None, :, :]).sum(axis=2) / 8.0
    assert np.array_equal(rm.matrix, l1)


def test_rescaled_metric_pseudometric_axioms():
    tp = EdgeDistribution.two_point(1, 2, Fraction(1, 2))
    field = sample_weights(tp, LatticeBox(2, 4), 5)
    m = rescaled_metric(field).matrix
    assert np.array_equal(m, m.T)
    assert np.all(np.diag(m) == 0.0)
    n = m.shape[0]
    for i, j, k in itertools.product(range(0, n, 5), repeat=3):
        assert m[i, k] <= m[i, j] + m[j, k] + 1e-12


def test_rescaled_metric_value_floor_map():
    field = _det_field(2, 4)
    rm = rescaled_metric(field)
    # points inside a cell map to the cell's lower-left lattice vertex
    assert rm.value((0.1, 0.1), (0.9, 0.1)) == rm.vertex_value((0, 0), (3, 0))
    assert rm.value((0.0, 0.0), (1.0, 1.0)) == 2.0


def test_rescaled_metric_csv_round_trip(tmp_path):
    field = _det_field(2, 2)
    rm = rescaled_metric(field)
    out = tmp_path / "metric.csv"
    rm.write_csv(out)
    raw = out.read_bytes()
    assert b"\r\n" in raw
    lines = raw.decode().strip().split("\r\n")
    header = lines[0].split(",")
    assert header[0] == "source"
    body = [ln.split(",") for ln in lines[1:]]
    assert len(body) == rm.matrix.shape[0]
    got = np.array([[float(v) for v in row[1:]] for row in body])
    assert np.array_equal(got, rm.matrix)


def test_rescaled_metric_explicit_points_guard():
    big = _det_field(2, 70)  # 71^2 = 5041 vertices > all-pairs cap
    with pytest.raises(ValueError):
        rescaled_metric(big)
    pts = np.array([[0, 0], [70, 0], [70, 70]])
    rm = rescaled_metric(big, points=pts)
    assert rm.matrix.shape == (3, 3)
    assert rm.matrix[0, 2] == 2.0


# ---------------------------------------------------------------------------
# continuum extension and the truncation gap
# ---------------------------------------------------------------------------


def test_continuous_metric_agrees_on_grid_nodes():
    tp = EdgeDistribution.two_point(1, 2, Fraction(1, 2))
    field = sample_weights(tp, LatticeBox(2, 6), 1)
    cm = continuous_metric(field, b=2.0)
    assert isinstance(cm, ContinuousMetric)
    tf = field.truncated(2.0)
    for u, v in [((0, 0), (6, 6)), ((2, 1), (5, 4))]:
        want = restricted_passage_time(tf, u, v) / 6.0
        got = cm.evaluate(np.array(u) / 6.0, np.array(v) / 6.0)
        assert abs(got - want) < 1e-12


@pytest.mark.parametrize("d,n,b", [(2, 4, 1.0), (2, 8, 2.0), (3, 4, 1.0)])
def test_uniform_gap_within_truncation_bound(d, n, b):
    tp = EdgeDistribution.two_point(1, 2, Fraction(1, 2))
    field = sample_weights(tp, LatticeBox(d, n), 13)
    rep = uniform_gap(field, b)
    assert rep.within_bound
    assert rep.bound == 2.0 * b * d / n
    assert 0.0 <= rep.gap <= rep.bound
    assert rep.n_pairs > 0


# ---------------------------------------------------------------------------
# disjoint paths
# ---------------------------------------------------------------------------


def _check_disjoint_family(box, x, y):
    paths = disjoint_paths(box, x, y)
    d = box.dimension
    l1 = int(np.abs(np.asarray(x) - np.asarray(y)).sum())
    assert len(paths) == d
    interiors = []
    for p in paths:
        assert p.endpoints() == (tuple(x), tuple(y))
        assert p.is_vertex_self_avoiding()
        assert p.hops in (l1, l1 + 2)
        assert np.all(p.vertices >= 0) and np.all(p.vertices <= box.side)
        interiors.append({tuple(v) for v in p.vertices[1:-1]})
    for a, b in itertools.combinations(interiors, 2):
        assert not (a & b)


def test_disjoint_paths_exhaustive_2d():
    box = LatticeBox(2, 3)
    coords = [(x, y) for x in range(4) for y in range(4)]
    for x, y in itertools.permutations(coords, 2):
        _check_disjoint_family(box, x, y)


def test_disjoint_paths_sampled_3d():
    box = LatticeBox(3, 3)
    rng = np.random.default_rng(0)
    for _ in range(60):
        x = tuple(rng.integers(0, 4, size=3).tolist())
        y = tuple(rng.integers(0, 4, size=3).tolist())
        if x == y:
            continue
        _check_disjoint_family(box, x, y)


# ---------------------------------------------------------------------------
# hubs and geodesic length statistics
# ---------------------------------------------------------------------------


def test_hub_check_deterministic_center():
    field = _det_field(2, 4)
    rep = hub_check(field, (2, 2), kappa=1.0)
    assert rep.is_hub  # all times from the center are at most 4 = kappa * n
    assert rep.worst_time_slack >= 0.0
    assert rep.n_targets == field.box.n_vertices
    j = rep.to_json()
    assert j["vertex"] == [2, 2] or tuple(j["vertex"]) == (2, 2)
    assert j["is_hub"] is True


def test_hub_check_fails_for_tiny_kappa():
    field = _det_field(2, 4)
    rep = hub_check(field, (0, 0), kappa=0.5)
    assert not rep.is_hub
    assert rep.worst_time_slack < 0.0


def test_geodesic_length_stats_ladder():
    tp = EdgeDistribution.two_point(1, 2, Fraction(1, 2))
    field = sample_weights(tp, LatticeBox(2, 6), 21)
    stats = geodesic_length_stats(field, b=2.0, L_values=[1.0, 50.0])
    assert stats["max_hops"] >= 6  # some pair spans the box
    flags = {row["L"]: row["long_geodesic"] for row in stats["ladder"]}
    assert flags[1.0] is True
    assert flags[50.0] is False
    for rec in stats["pairs"]:
        assert rec["hops"] >= abs(rec["source"][0] - rec["target"][0])
