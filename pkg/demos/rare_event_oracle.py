"""Exact rare-event probabilities on tiny boxes, and the bounds around them.

Everything here is exactly enumerable, so Monte-Carlo output can be
checked against true rationals rather than against itself.
"""

from fractions import Fraction

from fpplab.model import EdgeDistribution, LatticeBox
from fpplab.oracle import (
    EventSpec,
    chernoff_best_lambda,
    crude_lower_bound,
    exact_event_probability,
    fkg_supermultiplicativity_check,
    monte_carlo_event_probability,
)

dist = EdgeDistribution.two_point(1.0, 2.0, 0.5)
unit = LatticeBox(2, 1)

event = EventSpec.passage_time_at_most((0, 0), (1, 1), 2.0)
exact = exact_event_probability(event, dist, unit)
print(f"P(T((0,0),(1,1)) <= 2) on the unit box: {exact.p} "
      f"({exact.n_satisfying} of {exact.n_configs} weight configurations)")
assert exact.p == Fraction(7, 16)

mc = monte_carlo_event_probability(event, dist, unit, samples=2000, seed=1)
print(f"Monte-Carlo at 2000 samples: {mc.p_hat:.4f}, "
      f"95% CI ({mc.ci_low:.4f}, {mc.ci_high:.4f})")

# the cheap analytic lower bound: force one fixed monotone path
bound = crude_lower_bound(dist, (0, 0), (1, 1), 1.0)
print(f"\nper-edge product bound at t=1.0: {bound} <= {exact.p}")

# positive association makes concatenated lower tails supermultiplicative:
# reaching (2,2) cheaply is more likely than two independent cheap legs
rep = fkg_supermultiplicativity_check(dist, LatticeBox(2, 2), (1, 1), (1, 1), 2.0, 2.0)
print(f"\nP(T(0,(2,2)) <= 4) = {rep.lhs} >= {rep.rhs} = "
      f"P(leg1 <= 2) P(leg2 <= 2), slack {rep.slack}")

# upper tail: optimized exponential-moment bound along a fixed path
lam, val = chernoff_best_lambda(dist, eps=1.8, n=4, hops=4)
print(f"\nbest upper-tail exponent for eps=1.8, n=4: lambda={lam:.3f}, "
      f"bound {val:.4f}")
