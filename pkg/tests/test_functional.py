"""The three functional expressions, monotonicity probe, and the LD trend table."""

import math
from fractions import Fraction

import numpy as np
import pytest

from fpplab.elementary_rate import RatePoint, extend_surface
from fpplab.functional import (
    AnalyticRate,
    FunctionalError,
    PathFamily,
    SurfaceRate,
    empirical_ld_trend,
    functional_geodesic_sum,
    functional_intrinsic,
    functional_report,
    functional_sup_lower_bound,
    strict_monotonicity_probe,
)
from fpplab.geometry import (
    GeometryError,
    LipschitzPath,
    NormPlusHighways,
    network_from_highways,
)
from fpplab.model import EdgeDistribution

TP = EdgeDistribution.two_point(1, 2, Fraction(1, 2))
J = AnalyticRate([1.0, 1.0])


def diag_metric(lam=0.5):
    return NormPlusHighways([1.0, 1.0], [(LipschitzPath([[0, 0], [1, 1]]), lam)])


def piecewise_metric():
    hw = LipschitzPath([[0.0, 0.0], [1.0, 0.0]])
    return NormPlusHighways([1.0, 1.0], [(hw, [[0.5, 0.5], [1.0, 0.8]])])


def l1_metric(x, y):
    return float(np.abs(np.asarray(x) - np.asarray(y)).sum())


# ---------------------------------------------------------------------------
# rate integrands
# ---------------------------------------------------------------------------


def test_analytic_rate_values():
    assert J((1, 1), 1.0) == 1.0
    assert J((1, 0), 0.6) == pytest.approx(0.4)
    assert J((1, 0), 2.0) == 0.0  # clipped at zero
    half = AnalyticRate([1.0, 1.0], scale=0.5)
    assert half((1, 1), 1.0) == 0.5


def test_analytic_rate_joint_homogeneity():
    for u, z in [((1, 1), 1.0), ((0.3, 0.7), 0.4), ((2, 0), 1.1)]:
        assert J(np.array(u) * 2, z * 2) == 2 * J(u, z)


def test_analytic_rate_rejects_bad_parameters():
    with pytest.raises(FunctionalError):
        AnalyticRate([1.0, -1.0])
    with pytest.raises(FunctionalError):
        AnalyticRate([1.0, 1.0], scale=0.0)
    with pytest.raises(FunctionalError):
        AnalyticRate([1.0, 1.0], scale=math.inf)


def _toy_surface():
    def pt(x, zeta, est):
        return RatePoint(x=x, zeta=zeta, n=4, estimate=est, ci=(est, est),
                         method="exact-oracle")
    return extend_surface([
        pt((1, 0), 1.0, 0.7), pt((1, 0), 1.5, 0.0),
        pt((0, 1), 1.0, 0.7), pt((0, 1), 1.5, 0.0),
        pt((1, 1), 2.0, 0.8), pt((1, 1), 3.0, 0.0),
    ])


def test_surface_rate_exact_on_tabulated_rays():
    JS = SurfaceRate(_toy_surface())
    assert JS((1, 0), 1.0) == pytest.approx(0.7)
    assert JS((1, 0), 1.25) == pytest.approx(0.35)
    assert JS((1, 1), 2.0) == pytest.approx(0.8)
    assert JS((0, 0), 5.0) == 0.0
    assert JS.n_flagged == 0


def test_surface_rate_homogeneity_by_rescaling():
    JS = SurfaceRate(_toy_surface())
    assert JS((2, 0), 2.5) == pytest.approx(2 * JS((1, 0), 1.25))
    # negative components reach the same ray through reflection
    assert JS((-1, 0), 1.25) == pytest.approx(JS((1, 0), 1.25))


def test_surface_rate_blends_between_rays():
    JS = SurfaceRate(_toy_surface())
    v_axis = JS((1, 0), 1.2)
    v_diag = JS((1, 1), 2.4)
    blended = JS((1, 0.5), 1.8)
    assert min(0.0, v_axis, v_diag) <= blended <= max(v_axis, v_diag) + 1e-12


def test_surface_rate_flags_below_range_queries():
    JS = SurfaceRate(_toy_surface())
    before = JS.n_flagged
    JS((1, 0), 0.2)  # below the lowest tabulated speed on the ray
    assert JS.n_flagged == before + 1


# ---------------------------------------------------------------------------
# path families
# ---------------------------------------------------------------------------


def test_path_family_certificate_recomputed():
    fam = PathFamily(paths=[LipschitzPath([[0, 0], [1, 1]])])
    assert fam.certificate["n_paths"] == 1
    assert fam.certificate["pairwise_disjoint"]
    fam.certificate = {"forged": True}
    assert fam.validate()["n_paths"] == 1


def test_path_family_rejects_overlap():
    with pytest.raises(GeometryError):
        PathFamily(paths=[
            LipschitzPath([[0, 0], [1, 1]]),
            LipschitzPath([[0.5, 0.5], [1, 1]]),
        ])


def test_path_family_from_network():
    D = diag_metric()
    fam = PathFamily.from_network(network_from_highways(D))
    assert fam.certificate["n_paths"] == 1


# ---------------------------------------------------------------------------
# the three expressions
# ---------------------------------------------------------------------------


def test_diagonal_fixture_exact():
    D = diag_metric()
    net = network_from_highways(D)
    assert functional_geodesic_sum(D, net, J) == 1.0
    assert functional_intrinsic(D, net, J) == pytest.approx(1.0, abs=1e-12)
    assert functional_sup_lower_bound(D, J, PathFamily.from_network(net)) == 1.0


def test_no_highways_means_zero():
    D = NormPlusHighways([1.0, 1.0], [])
    net = network_from_highways(D)
    assert functional_geodesic_sum(D, net, J) == 0.0
    assert functional_intrinsic(D, net, J) == 0.0
    assert functional_sup_lower_bound(D, J, PathFamily(paths=[])) == 0.0


def test_halving_the_discount_raises_the_value():
    lo = diag_metric(0.25)
    hi = diag_metric(0.5)
    v_lo = functional_geodesic_sum(lo, network_from_highways(lo), J)
    v_hi = functional_geodesic_sum(hi, network_from_highways(hi), J)
    assert v_lo == 1.5 and v_hi == 1.0
    assert v_lo > v_hi


def test_piecewise_profile_all_three_expressions():
    D = piecewise_metric()
    net = network_from_highways(D)
    rep = functional_report(D, net, J)
    # (1 - 0.5) * 0.5 + (1 - 0.8) * 0.5
    assert rep.geodesic_sum == pytest.approx(0.35, abs=1e-12)
    assert rep.intrinsic == pytest.approx(0.35, abs=1e-12)
    assert rep.sup_bound == pytest.approx(0.35, abs=1e-12)
    assert rep.n_highways == 1 and rep.family_size == 1


def test_contribution_additive_over_highways():
    two = NormPlusHighways([1.0, 1.0], [
        (LipschitzPath([[0, 0], [1, 0]]), 0.6),
        (LipschitzPath([[0, 1], [1, 1]]), 0.9)])
    parts = []
    for hw, lam in [([[0, 0], [1, 0]], 0.6), ([[0, 1], [1, 1]], 0.9)]:
        one = NormPlusHighways([1.0, 1.0], [(LipschitzPath(hw), lam)])
        parts.append(functional_geodesic_sum(one, network_from_highways(one), J))
    total = functional_geodesic_sum(two, network_from_highways(two), J)
    assert parts[0] == pytest.approx(0.4, abs=1e-12)
    assert parts[1] == pytest.approx(0.1, abs=1e-12)
    assert total == parts[0] + parts[1]


def test_intrinsic_additive_under_subdivision():
    D = piecewise_metric()
    net = network_from_highways(D)
    whole = functional_intrinsic(D, net, J)
    halves = [
        functional_sup_lower_bound(
            D, J, PathFamily(paths=[LipschitzPath([[a, 0], [b, 0]])]))
        for a, b in [(0.0, 0.5), (0.5, 1.0)]
    ]
    assert whole == pytest.approx(sum(halves), abs=1e-12)


def test_scaling_rate_by_two_is_exact_everywhere():
    D = piecewise_metric()
    net = network_from_highways(D)
    fam = PathFamily.from_network(net)
    J2 = AnalyticRate([1.0, 1.0], scale=2.0)
    assert functional_geodesic_sum(D, net, J2) == 2 * functional_geodesic_sum(D, net, J)
    assert functional_intrinsic(D, net, J2) == 2 * functional_intrinsic(D, net, J)
    assert functional_sup_lower_bound(D, J2, fam) == 2 * functional_sup_lower_bound(D, J, fam)


def test_sup_bound_quarter_share():
    D = diag_metric()
    quarter = PathFamily(paths=[LipschitzPath([[0, 0], [0.25, 0.25]])])
    assert functional_sup_lower_bound(D, J, quarter) == 0.25


def test_sup_bound_off_highway_is_zero():
    D = diag_metric()
    off = PathFamily(paths=[LipschitzPath([[0, 1], [1, 0]])])
    assert functional_sup_lower_bound(D, J, off) == 0.0


def test_sup_bound_never_exceeds_geodesic_sum():
    D = piecewise_metric()
    net = network_from_highways(D)
    geo = functional_geodesic_sum(D, net, J)
    families = [
        PathFamily(paths=[LipschitzPath([[0.1, 0], [0.6, 0]])]),
        PathFamily(paths=[LipschitzPath([[0, 0], [0.5, 0]]),
                          LipschitzPath([[0.5, 0], [1, 0]])]),
        PathFamily(paths=[LipschitzPath([[0, 0.5], [1, 0.5]])]),
    ]
    for fam in families:
        assert functional_sup_lower_bound(D, J, fam) <= geo + 1e-12


def test_report_flags_tampered_network():
    D = diag_metric()
    net = network_from_highways(D)
    ts, cum = net.cum_tables[0]
    net.cum_tables[0] = (ts, cum * 1.1)
    with pytest.raises(GeometryError):
        functional_report(D, net, J)


def test_report_cross_check_enforced():
    D = diag_metric()
    net = network_from_highways(D)
    # the intrinsic value drifts from the geodesic sum by one quadrature ulp,
    # so a zero cross tolerance must trip
    with pytest.raises(FunctionalError):
        functional_report(D, net, J, cross_tol=0.0)
    rep = functional_report(D, net, J)
    assert abs(rep.delta_intrinsic) <= 1e-12
    j = rep.to_json()
    assert j["geodesic_sum"] == 1.0
    assert j["family_size"] == 1


# ---------------------------------------------------------------------------
# strict monotonicity
# ---------------------------------------------------------------------------


def test_probe_smaller_metric_wins():
    rep = strict_monotonicity_probe(diag_metric(0.5), diag_metric(0.6), J)
    assert rep.value_smaller == 1.0
    assert rep.value_larger == pytest.approx(0.8, abs=1e-12)
    assert rep.max_order_violation == 0.0
    assert rep.witness is not None


def test_probe_highway_beats_plain_norm():
    rep = strict_monotonicity_probe(
        diag_metric(0.5), NormPlusHighways([1.0, 1.0], []), J)
    assert rep.value_smaller == 1.0
    assert rep.value_larger == 0.0


def test_probe_rejects_equal_metrics():
    with pytest.raises(FunctionalError):
        strict_monotonicity_probe(diag_metric(0.5), diag_metric(0.5), J)


def test_probe_rejects_wrong_order():
    with pytest.raises(FunctionalError):
        strict_monotonicity_probe(diag_metric(0.6), diag_metric(0.5), J)


# ---------------------------------------------------------------------------
# empirical LD trend
# ---------------------------------------------------------------------------


def scaled_l1(x, y):
    return 0.9 * l1_metric(x, y)


def test_ld_trend_impossible_event_has_infinite_rate():
    tab = empirical_ld_trend(scaled_l1, TP, 0.05, [1], dim=2)
    row = tab.rows[0]
    assert row.method == "exact-oracle"
    assert row.p_exact == 0
    assert row.samples == 16  # 2^4 configurations enumerated
    assert row.rate == math.inf
    j = row.to_json()
    assert j["rate"] is None
    assert j["rate_is_infinite"] is True


def test_ld_trend_sure_event_has_zero_rate():
    tab = empirical_ld_trend(l1_metric, TP, 2.0, [1], dim=2)
    row = tab.rows[0]
    assert row.p_exact == 1
    assert row.rate == 0.0


def test_ld_trend_exact_ladder_values():
    tab = empirical_ld_trend(scaled_l1, TP, 2.0, [1, 2], dim=2)
    assert [r.p_exact for r in tab.rows] == [Fraction(15, 16), Fraction(4095, 4096)]
    for r in tab.rows:
        assert r.rate == pytest.approx(-math.log(float(r.p_exact)) / r.n)


def test_ld_trend_probability_monotone_in_eps():
    ps = []
    for eps in (0.05, 0.5, 2.0):
        tab = empirical_ld_trend(scaled_l1, TP, eps, [2], dim=2)
        ps.append(tab.rows[0].p_exact)
    assert ps[0] <= ps[1] <= ps[2]
    assert ps[0] == 0 and ps[2] == Fraction(4095, 4096)


def test_ld_trend_mc_censored_row():
    tab = empirical_ld_trend(scaled_l1, TP, 0.05, [1], dim=2,
                             method="mc", samples=50, seed=4)
    row = tab.rows[0]
    assert row.method == "monte-carlo"
    assert row.censored and row.hits == 0
    assert row.rate is None
    assert row.ci[0] > 0 and row.ci[1] == math.inf
    j = row.to_json()
    assert j["ci"][1] is None


def test_ld_trend_mc_regular_row():
    tab = empirical_ld_trend(scaled_l1, TP, 2.0, [2], dim=2,
                             method="mc", samples=60, seed=9)
    row = tab.rows[0]
    assert not row.censored
    assert row.hits > 0
    assert row.ci[0] - 1e-12 <= row.rate <= row.ci[1] + 1e-12


def test_ld_trend_table_json_is_qualitative():
    tab = empirical_ld_trend(scaled_l1, TP, 2.0, [1], dim=2, functional_value=0.35)
    j = tab.to_json()
    assert j["functional_value"] == 0.35
    assert "qualitative" in j["comparison"]
    assert len(j["rows"]) == 1


def test_ld_trend_metric_object_supplies_dim():
    D = diag_metric()
    tab = empirical_ld_trend(D, TP, 2.0, [1])
    assert tab.rows[0].n == 1
    with pytest.raises(ValueError):
        empirical_ld_trend(l1_metric, TP, 2.0, [1])  # bare callable, no dim
    with pytest.raises(ValueError):
        empirical_ld_trend(D, TP, -0.1, [1])
