"""Continuum paths, norm-plus-highways metrics, and highway networks."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fpplab._segments import (
    complement_segments,
    fvec,
    merge_intervals,
    point_on_segment,
    segment_intersection,
)
from fpplab.geometry import (
    GeodesyError,
    GeometryError,
    GridPseudometric,
    HWChain,
    LipschitzPath,
    NormPlusHighways,
    build_highway_network,
    cut_path_against,
    d_length,
    gradient_by_paths,
    hausdorff_integrate,
    hw_insert,
    metric_derivative,
    network_from_highways,
    paths_pairwise_disjoint,
    remove_loops,
)

F = Fraction


def diag_metric():
    """Unit-square diagonal highway at discount 1/2: D(corner, corner) = 1."""
    return NormPlusHighways([1.0, 1.0], [(LipschitzPath([[0, 0], [1, 1]]), 0.5)])


def piecewise_metric():
    """Horizontal highway, first half at discount 1/2, second at 4/5."""
    hw = LipschitzPath([[0.0, 0.0], [1.0, 0.0]])
    return NormPlusHighways([1.0, 1.0], [(hw, [[0.5, 0.5], [1.0, 0.8]])])


# ---------------------------------------------------------------------------
# exact segment helpers
# ---------------------------------------------------------------------------


def test_segment_intersection_transversal_point():
    out = segment_intersection(fvec((0, 0)), fvec((1, 1)), fvec((0, 1)), fvec((1, 0)))
    assert out == ("point", F(1, 2), F(1, 2))


def test_segment_intersection_disjoint_parallel():
    out = segment_intersection(fvec((0, 0)), fvec((1, 0)), fvec((0, 1)), fvec((1, 1)))
    assert out is None


def test_segment_intersection_collinear_overlap():
    out = segment_intersection(fvec((0, 0)), fvec((1, 0)), fvec((0.5, 0)), fvec((2, 0)))
    kind, (t0, t1), (u0, u1) = out
    assert kind == "overlap"
    assert (t0, t1) == (F(1, 2), F(1))
    assert (u0, u1) == (F(0), F(1, 3))


def test_segment_intersection_endpoint_touch():
    out = segment_intersection(fvec((0, 0)), fvec((1, 0)), fvec((1, 0)), fvec((1, 1)))
    assert out == ("point", F(1), F(0))


def test_point_on_segment_exact():
    assert point_on_segment(fvec((0.5, 0.5)), fvec((0, 0)), fvec((1, 1))) == F(1, 2)
    assert point_on_segment(fvec((0.5, 0.25)), fvec((0, 0)), fvec((1, 1))) is None
    assert point_on_segment(fvec((2, 2)), fvec((0, 0)), fvec((1, 1))) is None


def test_merge_intervals_and_complement():
    merged = merge_intervals([(F(0), F(1, 4)), (F(1, 8), F(1, 2)), (F(3, 4), F(3, 4))])
    assert merged == [(F(0), F(1, 2)), (F(3, 4), F(3, 4))]
    rest = complement_segments((F(0), F(1)), merged)
    # the isolated touch point splits the right piece but has zero length
    assert rest == [(F(1, 2), F(3, 4)), (F(3, 4), F(1))]


# ---------------------------------------------------------------------------
# paths
# ---------------------------------------------------------------------------


def test_path_canonical_parametrization():
    p = LipschitzPath([[0, 0], [1, 0], [1, 1]])
    assert p.length_l1 == 2.0
    assert np.array_equal(p.point_at(0.5), [0.5, 0.0])
    assert np.array_equal(p.point_at(1.5), [1.0, 0.5])
    exact = p.point_at_frac(F(3, 2))
    assert exact == (F(1), F(1, 2))


def test_path_drops_duplicate_breakpoints():
    p = LipschitzPath([[0, 0], [0, 0], [1, 0], [1, 0], [1, 1]])
    assert p.n_pieces == 2
    with pytest.raises(GeometryError):
        LipschitzPath([[0.3, 0.3], [0.3, 0.3]])


def test_subpath_exact_endpoints():
    p = LipschitzPath([[0, 0], [1, 0], [1, 1]])
    sub = p.subpath(F(1, 2), F(3, 2))
    assert sub.length_l1 == 1.0
    assert np.array_equal(sub.points[0], [0.5, 0.0])
    assert np.array_equal(sub.points[-1], [1.0, 0.5])


def test_self_intersection_detection():
    straight = LipschitzPath([[0, 0], [1, 1]])
    assert straight.is_injective()
    assert straight.first_self_intersection() is None
    bow = LipschitzPath([[0, 0], [1, 0], [1, 1], [0.5, -0.5]])
    assert not bow.is_injective()
    assert bow.first_self_intersection() is not None


def test_remove_loops_keeps_endpoints():
    bow = LipschitzPath([[0, 0], [1, 0], [1, 1], [0.5, 0.0], [0.5, -0.5]])
    clean = remove_loops(bow)
    assert clean.is_injective()
    assert np.array_equal(clean.points[0], [0, 0])
    assert np.array_equal(clean.points[-1], [0.5, -0.5])
    assert clean.length_l1 <= bow.length_l1


def test_cut_path_against_crossing_obstacle():
    path = LipschitzPath([[0, 0], [1, 1]])
    obstacle = LipschitzPath([[0, 1], [1, 0]])
    parts = cut_path_against(path, [obstacle])
    assert len(parts) == 2
    assert np.array_equal(parts[0].points[-1], [0.5, 0.5])
    assert np.array_equal(parts[1].points[0], [0.5, 0.5])
    total = sum(part.length_l1 for part in parts)
    assert total == path.length_l1


def test_cut_path_against_collinear_overlap():
    path = LipschitzPath([[0, 0], [1, 0]])
    obstacle = LipschitzPath([[0.25, 0], [0.5, 0]])
    parts = cut_path_against(path, [obstacle])
    lens = sorted(part.length_l1 for part in parts)
    assert lens == [0.25, 0.5]


def test_pairwise_disjoint_touch_policy():
    a = LipschitzPath([[0, 0], [1, 1]])
    b = LipschitzPath([[0, 1], [1, 0]])
    ok, touches = paths_pairwise_disjoint([a, b], allow_touch=True)
    assert ok and touches == 1
    ok, _ = paths_pairwise_disjoint([a, b], allow_touch=False)
    assert not ok
    c = LipschitzPath([[0.25, 0.25], [0.75, 0.75]])
    ok, _ = paths_pairwise_disjoint([a, c], allow_touch=True)
    assert not ok  # positive-length overlap is never allowed


# ---------------------------------------------------------------------------
# norm-plus-highways metrics
# ---------------------------------------------------------------------------


def test_diagonal_fixture_exact_values():
    D = diag_metric()
    one = D.evaluate((0, 0), (1, 1))
    assert one == 1.0
    assert D((0, 0), (1, 1)) == one
    # the classic access fixture: enter at (1/4,1/4), leave at (3/4,3/4)
    assert D.evaluate((0.25, 0.0), (0.75, 1.0)) == 1.0


def test_piecewise_profile_value():
    D = piecewise_metric()
    assert D.evaluate((0, 0), (1, 0)) == pytest.approx(0.65, abs=1e-12)
    # half-highway rides isolate each discount
    assert D.evaluate((0, 0), (0.5, 0)) == pytest.approx(0.25, abs=1e-12)
    assert D.evaluate((0.5, 0), (1, 0)) == pytest.approx(0.4, abs=1e-12)


def test_metric_never_exceeds_norm():
    D = diag_metric()
    rng = np.random.default_rng(3)
    for _ in range(40):
        x, y = rng.random(2), rng.random(2)
        g = float(np.abs(x - y).sum())
        assert D.evaluate(x, y) <= g + 1e-12


@given(st.integers(0, 10), st.integers(0, 10), st.integers(0, 10), st.integers(0, 10))
@settings(max_examples=50, deadline=None)
def test_metric_symmetry_on_grid(a, b, c, d):
    D = diag_metric()
    x = np.array([a, b]) / 10.0
    y = np.array([c, d]) / 10.0
    assert D.evaluate(x, y) == pytest.approx(D.evaluate(y, x), abs=1e-12)


def test_metric_triangle_inequality_sampled():
    D = piecewise_metric()
    rng = np.random.default_rng(8)
    pts = rng.random((10, 2))
    for i in range(10):
        for j in range(10):
            for k in range(10):
                lhs = D.evaluate(pts[i], pts[k])
                rhs = D.evaluate(pts[i], pts[j]) + D.evaluate(pts[j], pts[k])
                assert lhs <= rhs + 1e-9


@given(st.tuples(st.integers(0, 8), st.integers(0, 8)),
       st.tuples(st.integers(0, 8), st.integers(0, 8)),
       st.tuples(st.integers(0, 8), st.integers(0, 8)))
@settings(max_examples=40, deadline=None)
def test_equicontinuity_in_first_argument(xa, xb, y):
    D = diag_metric()
    x1 = np.array(xa) / 8.0
    x2 = np.array(xb) / 8.0
    yy = np.array(y) / 8.0
    g = float(np.abs(x1 - x2).sum())
    assert abs(D.evaluate(x1, yy) - D.evaluate(x2, yy)) <= g + 1e-12


def test_weighted_norm_enters_distances():
    D = NormPlusHighways([2.0, 1.0], [(LipschitzPath([[0, 0], [1, 0]]), 0.5)])
    # off-highway vertical move costs the light weight
    assert D.evaluate((0.5, 0.2), (0.5, 0.7)) == pytest.approx(0.5, abs=1e-12)
    # horizontal highway ride halves the heavy weight
    assert D.evaluate((0, 0), (1, 0)) == pytest.approx(1.0, abs=1e-12)


def test_crossing_highways_rejected():
    with pytest.raises(GeometryError):
        NormPlusHighways([1.0, 1.0], [
            (LipschitzPath([[0, 0], [1, 1]]), 0.5),
            (LipschitzPath([[0, 1], [1, 0]]), 0.5),
        ])


def test_non_geodesic_highway_rejected():
    # a bulging path at full speed rides longer than the straight norm cost
    with pytest.raises(GeodesyError):
        NormPlusHighways([1.0, 1.0], [
            (LipschitzPath([[0, 0], [0.5, 0.4], [1, 0]]), 1.0)])
    # discounts outside (0, 1] are rejected outright
    with pytest.raises(GeometryError):
        NormPlusHighways([1.0, 1.0], [(LipschitzPath([[0, 0], [1, 0]]), 1.2)])


def test_validate_geodesics_passes_on_fixtures():
    diag_metric().validate_geodesics()
    piecewise_metric().validate_geodesics()


def test_geodesic_matches_evaluate_and_d_length():
    D = diag_metric()
    for x, y in [((0, 0), (1, 1)), ((0.25, 0.0), (0.75, 1.0)), ((0.1, 0.8), (0.9, 0.3))]:
        path, val = D.geodesic(x, y)
        assert val == pytest.approx(D.evaluate(x, y), abs=1e-12)
        assert np.allclose(path.points[0], x) and np.allclose(path.points[-1], y)
        assert d_length(D, path) == pytest.approx(val, rel=1e-6)


def test_refined_never_increases_values():
    D = piecewise_metric()
    R = D.refined()
    assert R.access_points == 2 * D.access_points - 1
    rng = np.random.default_rng(1)
    for _ in range(20):
        x, y = rng.random(2), rng.random(2)
        assert R.evaluate(x, y) <= D.evaluate(x, y) + 1e-12


def test_to_json_round_trip():
    D = piecewise_metric()
    back = NormPlusHighways.from_json(D.to_json())
    rng = np.random.default_rng(5)
    for _ in range(10):
        x, y = rng.random(2), rng.random(2)
        assert back.evaluate(x, y) == D.evaluate(x, y)


# ---------------------------------------------------------------------------
# grid pseudometric
# ---------------------------------------------------------------------------


def test_grid_pseudometric_contract():
    D = diag_metric()
    G = GridPseudometric.from_function(D.evaluate, m=4, dim=2)
    # exact at grid nodes
    assert G.evaluate((0, 0), (1, 1)) == D.evaluate((0, 0), (1, 1))
    assert G.evaluate((0.25, 0.5), (0.75, 0.25)) == pytest.approx(
        D.evaluate((0.25, 0.5), (0.75, 0.25)), abs=1e-12)
    # multilinear between nodes: midpoint of two node pairs averages
    v = G.evaluate((0.125, 0.0), (1.0, 1.0))
    a = G.evaluate((0.0, 0.0), (1.0, 1.0))
    b = G.evaluate((0.25, 0.0), (1.0, 1.0))
    assert v == pytest.approx(0.5 * (a + b), abs=1e-12)
    with pytest.raises(GeometryError):
        GridPseudometric(np.zeros((4, 4)), m=4, dim=2)


# ---------------------------------------------------------------------------
# min-plus chains and insertion
# ---------------------------------------------------------------------------


def test_chain_base_is_the_norm():
    chain = HWChain.base(np.array([1.0, 1.0]))
    assert chain.query((0, 0), (1, 1)) == 2.0
    assert chain.query((0.25, 0), (0.5, 0.5)) == 0.75


def test_hw_insert_reaches_target_and_stays_above():
    D = diag_metric()
    chain = HWChain.base(D.weights)
    geo, val = D.geodesic((0, 0), (1, 1))
    assert val == 1.0
    nxt = hw_insert(chain, geo, D)
    assert nxt.query((0, 0), (1, 1)) == pytest.approx(1.0, abs=1e-9)
    rng = np.random.default_rng(2)
    for _ in range(25):
        x, y = rng.random(2), rng.random(2)
        q2 = nxt.query(x, y)
        assert q2 <= chain.query(x, y) + 1e-12   # insertion only lowers
        assert q2 >= D.evaluate(x, y) - 1e-9     # never below the target


def test_hw_insert_rejects_non_geodesic():
    D = diag_metric()
    chain = HWChain.base(D.weights)
    elbow = LipschitzPath([[0, 0], [1, 0], [1, 1]])
    with pytest.raises(GeodesyError):
        hw_insert(chain, elbow, D)


def test_network_from_highways_recovers_profile():
    D = piecewise_metric()
    net = network_from_highways(D)
    net.validate()
    assert net.converged
    profile = net.discount_profile(0)
    lams = {}
    for t0, t1, lam in profile:
        mid = 0.5 * (t0 + t1)
        lams[mid < 0.5] = lam
    assert lams[True] == pytest.approx(0.5, abs=1e-9)
    assert lams[False] == pytest.approx(0.8, abs=1e-9)


def test_build_highway_network_seeded_convergence():
    D = diag_metric()
    net = build_highway_network(
        D, n_geodesics=6, tol=1e-6,
        seed_pairs=[(np.zeros(2), np.ones(2))], seed=0)
    assert net.converged
    sups = [rec["sup_distance"] for rec in net.diagnostics]
    assert all(b <= a + 1e-12 for a, b in zip(sups, sups[1:]))
    assert sups[-1] <= 1e-6
    origins = {rec["origin"] for rec in net.diagnostics}
    assert "seed" in origins
    net.validate()


def test_network_json_shape():
    D = diag_metric()
    net = network_from_highways(D)
    j = net.to_json()
    assert j["converged"] is True
    assert len(j["paths"]) == len(net.paths)
    rec = j["paths"][0]
    assert len(rec["params"]) == len(rec["cum"])


# ---------------------------------------------------------------------------
# metric derivative and gradients
# ---------------------------------------------------------------------------


def test_metric_derivative_on_highway():
    D = diag_metric()
    hw = LipschitzPath([[0, 0], [1, 1]])
    md = metric_derivative(D, hw, t=1.0)
    assert md.value == pytest.approx(0.5, abs=1e-9)
    assert not md.flagged


def test_metric_derivative_flagged_at_discount_break():
    D = piecewise_metric()
    hw = LipschitzPath([[0, 0], [1, 0]])
    md = metric_derivative(D, hw, t=0.5)
    assert md.flagged
    assert md.one_sided_gap == pytest.approx(0.3, abs=1e-6)
    with pytest.raises(GeometryError):
        metric_derivative(D, hw, t=0.0)


def test_gradient_classification():
    D = diag_metric()
    on = gradient_by_paths(D, (0.5, 0.5), (1, 1))
    assert on.kind == "analytic" and on.value == pytest.approx(1.0, abs=1e-12)
    across = gradient_by_paths(D, (0.5, 0.5), (1, -1))
    assert across.kind == "analytic" and across.value == pytest.approx(2.0, abs=1e-12)
    off = gradient_by_paths(D, (0.25, 0.75), (1, 0))
    assert off.kind == "analytic" and off.value == pytest.approx(1.0, abs=1e-12)
    end = gradient_by_paths(D, (0.0, 0.0), (1, 1))
    assert end.kind == "upper-bound" and end.boundary
    zero = gradient_by_paths(D, (0.5, 0.5), (0, 0))
    assert zero.value == 0.0


def test_gradient_generic_metric_upper_bound():
    D = diag_metric()
    G = GridPseudometric.from_function(D.evaluate, m=8, dim=2)
    est = gradient_by_paths(G, (0.25, 0.25), (1, 1))
    assert est.kind == "upper-bound"
    assert est.value <= 2.0 + 1e-9


# ---------------------------------------------------------------------------
# Hausdorff integration
# ---------------------------------------------------------------------------


def test_hausdorff_integral_of_one_is_euclidean_length():
    diag = LipschitzPath([[0, 0], [1, 1]])
    val = hausdorff_integrate([diag], lambda x, u: 1.0)
    assert val == pytest.approx(math.sqrt(2), rel=1e-12)


def test_hausdorff_integral_additive_over_touching_paths():
    a = LipschitzPath([[0, 0], [0.5, 0.5]])
    b = LipschitzPath([[0.5, 0.5], [1, 1]])
    val = hausdorff_integrate([a, b], lambda x, u: 1.0)
    assert val == pytest.approx(math.sqrt(2), rel=1e-12)


def test_hausdorff_integrand_sees_unit_tangent():
    seen = []

    def f(x, u):
        seen.append(np.array(u))
        return 1.0

    hausdorff_integrate([LipschitzPath([[0, 0], [1, 1]])], f, order=2)
    for u in seen:
        assert np.linalg.norm(u) == pytest.approx(1.0, rel=1e-12)


def test_hausdorff_rejects_overlapping_paths():
    a = LipschitzPath([[0, 0], [1, 1]])
    with pytest.raises(GeometryError):
        hausdorff_integrate([a, a], lambda x, u: 1.0)
    loop = LipschitzPath([[0, 0], [1, 0], [1, 1], [0.5, -0.5]])
    with pytest.raises(GeometryError):
        hausdorff_integrate([loop], lambda x, u: 1.0)
