"""Edge-weight laws, lattice boxes, and the counter-based weight sampler."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fpplab.model import (
    EdgeDistribution,
    LatticeBox,
    WeightField,
    sample_weights,
    subcritical_atom_check,
    truncate,
)


# ---------------------------------------------------------------------------
# distributions
# ---------------------------------------------------------------------------


def test_two_point_atoms_and_mean():
    tp = EdgeDistribution.two_point(1, 2, Fraction(1, 2))
    values, probs = tp.atoms()
    assert values == (1.0, 2.0)
    assert probs == (Fraction(1, 2), Fraction(1, 2))
    assert tp.mean() == 1.5
    assert tp.support_infimum == 1.0
    assert tp.support_supremum() == 2.0


def test_cdf_fraction_is_exact():
    tp = EdgeDistribution.two_point(1, 2, Fraction(1, 3))
    assert tp.cdf_fraction(0.5) == Fraction(0)
    assert tp.cdf_fraction(1.0) == Fraction(1, 3)
    assert tp.cdf_fraction(1.7) == Fraction(1, 3)
    assert tp.cdf_fraction(2.0) == Fraction(1)
    # continuous laws have no exact rational cdf
    assert EdgeDistribution.uniform(0.0, 1.0).cdf_fraction(0.5) is None


def test_finite_support_probabilities_sum_to_one():
    with pytest.raises(ValueError):
        EdgeDistribution.finite_support([1, 2], [Fraction(1, 3), Fraction(1, 3)])
    fs = EdgeDistribution.finite_support(
        [1, 2, 4], [Fraction(1, 4), Fraction(1, 2), Fraction(1, 4)])
    assert fs.mean() == 1 * 0.25 + 2 * 0.5 + 4 * 0.25


def test_truncation_caps_support():
    tp = EdgeDistribution.two_point(1, 3, Fraction(1, 2))
    tr = truncate(tp, 2.0)
    assert tr.support_supremum() == 2.0
    assert tr.cdf(2.0) == 1.0
    u = np.linspace(0.0, 0.999, 100)
    assert np.array_equal(tr.sample_from_uniforms(u),
                          np.minimum(tp.sample_from_uniforms(u), 2.0))


def test_two_point_log_mgf_closed_form():
    tp = EdgeDistribution.two_point(1, 2, Fraction(1, 2))
    lam = 0.7
    want = math.log(0.5 * math.exp(lam) + 0.5 * math.exp(2 * lam))
    assert abs(tp.log_mgf(lam) - want) < 1e-14


def test_exponential_log_mgf_diverges_at_rate():
    ex = EdgeDistribution.exponential(1.0)
    assert math.isfinite(ex.log_mgf(0.5))
    with pytest.raises(ValueError):
        ex.log_mgf(1.5)


def test_spec_round_trip():
    laws = [
        EdgeDistribution.deterministic(1.5),
        EdgeDistribution.two_point(1, 2, Fraction(2, 5)),
        EdgeDistribution.uniform(0.5, 2.0),
        EdgeDistribution.exponential(2.0, shift=0.25),
        EdgeDistribution.finite_support([1, 2, 3],
                                        [Fraction(1, 2), Fraction(1, 4), Fraction(1, 4)]),
        truncate(EdgeDistribution.two_point(1, 3, Fraction(1, 2)), 2.0),
    ]
    for law in laws:
        rec = law.spec()
        back = EdgeDistribution.from_spec(rec)
        assert back.spec() == rec
        ugrid = np.linspace(0.0, 0.999, 50)
        assert np.allclose(back.sample_from_uniforms(ugrid),
                           law.sample_from_uniforms(ugrid))


def test_sample_from_uniforms_two_point_split():
    tp = EdgeDistribution.two_point(1, 2, Fraction(1, 2))
    out = tp.sample_from_uniforms(np.array([0.0, 0.4999, 0.5, 0.9]))
    assert out.tolist() == [1.0, 1.0, 2.0, 2.0]


@given(st.floats(min_value=0.0, max_value=0.999), st.integers(0, 2))
@settings(max_examples=60, deadline=None)
def test_inverse_cdf_monotone(u, which):
    laws = [
        EdgeDistribution.two_point(1, 2, Fraction(1, 2)),
        EdgeDistribution.uniform(0.5, 2.0),
        EdgeDistribution.exponential(1.0),
    ]
    law = laws[which]
    lo, hi = law.sample_from_uniforms(np.array([u, min(u + 1e-4, 0.9995)]))
    assert lo <= hi


# ---------------------------------------------------------------------------
# lattice boxes
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("d,n", [(2, 1), (2, 4), (3, 2), (3, 5)])
def test_box_edge_and_vertex_counts(d, n):
    box = LatticeBox(dimension=d, side=n)
    assert box.n_vertices == (n + 1) ** d
    assert box.n_edges == d * n * (n + 1) ** (d - 1)


def test_vertex_id_round_trip():
    box = LatticeBox(dimension=3, side=3)
    coords = box.all_vertex_coords()
    ids = box.vertex_id(coords)
    assert sorted(ids.tolist()) == list(range(box.n_vertices))


# ---------------------------------------------------------------------------
# weight sampling
# ---------------------------------------------------------------------------


def test_sample_weights_deterministic_in_seed():
    tp = EdgeDistribution.two_point(1, 2, Fraction(1, 2))
    box = LatticeBox(dimension=2, side=6)
    a = sample_weights(tp, box, 11)
    b = sample_weights(tp, box, 11)
    c = sample_weights(tp, box, 12)
    assert np.array_equal(a.weights, b.weights)
    assert not np.array_equal(a.weights, c.weights)


def test_sample_weights_support():
    fs = EdgeDistribution.finite_support([1, 2, 4],
                                         [Fraction(1, 4), Fraction(1, 2), Fraction(1, 4)])
    box = LatticeBox(dimension=2, side=8)
    field = sample_weights(fs, box, 0)
    assert set(np.unique(field.weights)) <= {1.0, 2.0, 4.0}
    assert field.weights.shape == (box.n_edges,)


def test_truncated_field_is_min_coupling():
    tp = EdgeDistribution.two_point(1, 3, Fraction(1, 2))
    box = LatticeBox(dimension=2, side=5)
    field = sample_weights(tp, box, 4)
    tf = field.truncated(2.0)
    assert isinstance(tf, WeightField)
    assert np.array_equal(tf.weights, np.minimum(field.weights, 2.0))


def test_weight_frequencies_near_law():
    """The counter-based generator should not bias the marginal law."""
    tp = EdgeDistribution.two_point(1, 2, Fraction(1, 2))
    box = LatticeBox(dimension=2, side=16)
    field = sample_weights(tp, box, 2024)
    frac_light = float(np.mean(field.weights == 1.0))
    se = math.sqrt(0.25 / box.n_edges)
    assert abs(frac_light - 0.5) < 4 * se


# ---------------------------------------------------------------------------
# percolation atom condition
# ---------------------------------------------------------------------------


def test_subcritical_atom_check_exact_in_d2():
    ok = subcritical_atom_check(
        EdgeDistribution.finite_support([0, 1], [Fraction(1, 4), Fraction(3, 4)]), 2)
    assert ok.subcritical and ok.exact_threshold
    at_threshold = subcritical_atom_check(
        EdgeDistribution.finite_support([0, 1], [Fraction(1, 2), Fraction(1, 2)]), 2)
    assert not at_threshold.subcritical  # the inequality is strict


def test_subcritical_atom_check_d3_table_value():
    rep = subcritical_atom_check(EdgeDistribution.two_point(1, 2, Fraction(1, 2)), 3)
    assert rep.atom == 0
    assert rep.subcritical
    assert abs(rep.threshold - 0.2488126) < 1e-7
    with pytest.raises(ValueError):
        subcritical_atom_check(EdgeDistribution.deterministic(1.0), 4)
