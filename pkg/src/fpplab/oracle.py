"""Exact small-instance probabilities and analytic bounds.

The enumeration oracle walks every weight configuration of a finite-support
law on the edges of a small box and reports event probabilities as exact
rationals.  It is the ground truth that the simulators are audited against.
Analytic companions: the crude per-edge lower bound, the lower-tail rate of
an i.i.d. sum (a Legendre transform of the log moment generating function),
and Chernoff upper-tail bounds.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from fpplab.model import EdgeDistribution, LatticeBox, WeightField, _adjacency, _edge_arrays
from fpplab.passage_time import _dijkstra_heap, _region_mask, hub_check

__all__ = [
    "EventSpec",
    "ExactProbability",
    "CapExceededError",
    "exact_event_probability",
    "MCEstimate",
    "monte_carlo_event_probability",
    "wilson_interval",
    "validate_decreasing",
    "FKGReport",
    "fkg_supermultiplicativity_check",
    "crude_lower_bound",
    "cramer_rate",
    "iid_sum_lower_tail_rate",
    "chernoff_upper_tail",
    "chernoff_best_lambda",
]


class CapExceededError(RuntimeError):
    """Raised when an enumeration would exceed the configuration cap."""

    def __init__(self, required: int, cap: int):
        super().__init__(f"enumeration needs {required} configurations, cap is {cap}")
        self.required = required
        self.cap = cap


@dataclass(frozen=True)
class EventSpec:
    """A weight-field event.

    ``kind`` is one of ``passage_time_at_most``, ``ld_lower``, ``hub`` or
    ``custom``.  All built-in kinds are decreasing: raising any edge weight
    can only destroy the event, never create it.
    """

    kind: str
    params: dict
    decreasing: bool
    name: str

    @classmethod
    def passage_time_at_most(cls, x, y, t, region=None) -> "EventSpec":
        return cls(
            kind="passage_time_at_most",
            params={"x": tuple(int(c) for c in x), "y": tuple(int(c) for c in y),
                    "t": float(t), "region": region},
            decreasing=True,
            name=f"T({tuple(int(c) for c in x)},{tuple(int(c) for c in y)})<={float(t)}",
        )

    @classmethod
    def ld_lower(cls, metric_fn: Callable, eps: float, grid=None) -> "EventSpec":
        """All grid pairs satisfy T-hat(x, y) <= D(x, y) + eps."""
        return cls(
            kind="ld_lower",
            params={"metric_fn": metric_fn, "eps": float(eps), "grid": grid},
            decreasing=True,
            name=f"LD-lower(eps={float(eps)})",
        )

    @classmethod
    def hub(cls, x, kappa: float) -> "EventSpec":
        return cls(
            kind="hub",
            params={"x": tuple(int(c) for c in x), "kappa": float(kappa)},
            decreasing=True,
            name=f"hub({tuple(int(c) for c in x)},kappa={float(kappa)})",
        )

    @classmethod
    def custom(cls, fn: Callable[[WeightField], bool], decreasing: bool, name: str) -> "EventSpec":
        return cls(kind="custom", params={"fn": fn}, decreasing=decreasing, name=name)


def _predicate(event: EventSpec, box: LatticeBox, dist: EdgeDistribution):
    """Compile an event to (callable on a weight buffer, relevant edge mask)."""
    n_edges = box.n_edges
    indptr, nbrs, eids = _adjacency(box.dimension, box.side)
    buf = np.empty(n_edges)
    shared_field = WeightField(box=box, distribution=dist, master_seed=0, weights=buf)

    if event.kind == "passage_time_at_most":
        p = event.params
        mask = _region_mask(box, p["region"])
        sid, tid = box.vertex_id(p["x"]), box.vertex_id(p["y"])
        if mask is not None and not (mask[sid] and mask[tid]):
            raise ValueError("event endpoints must belong to the region")
        t = p["t"]

        def pred(w):
            buf[:] = w
            dist_arr, _ = _dijkstra_heap(indptr, nbrs, eids, buf, sid, mask, box.n_vertices)
            return dist_arr[tid] <= t

        if mask is None:
            edge_mask = np.ones(n_edges, dtype=bool)
        else:
            _, _, (u_flat, v_flat) = _edge_arrays(box.dimension, box.side)
            edge_mask = mask[u_flat] & mask[v_flat]
        return pred, edge_mask

    if event.kind == "ld_lower":
        p = event.params
        n = box.side
        grid = p["grid"]
        if grid is None:
            grid = box.all_vertex_coords()
        grid = np.asarray(grid, dtype=np.int64)
        gids = np.atleast_1d(box.vertex_id(grid))
        D = np.empty((len(grid), len(grid)))
        for i in range(len(grid)):
            for j in range(len(grid)):
                D[i, j] = p["metric_fn"](grid[i] / n, grid[j] / n)
        budget = D + p["eps"]

        def pred(w):
            buf[:] = w
            for i, g in enumerate(gids):
                dist_arr, _ = _dijkstra_heap(indptr, nbrs, eids, buf, int(g), None, box.n_vertices)
                if np.any(dist_arr[gids] / n > budget[i]):
                    return False
            return True

        return pred, np.ones(n_edges, dtype=bool)

    if event.kind == "hub":
        p = event.params

        def pred(w):
            buf[:] = w
            return hub_check(shared_field, p["x"], p["kappa"]).is_hub

        return pred, np.ones(n_edges, dtype=bool)

    if event.kind == "custom":
        fn = event.params["fn"]

        def pred(w):
            buf[:] = w
            return bool(fn(shared_field))

        return pred, np.ones(n_edges, dtype=bool)

    raise ValueError(f"unknown event kind {event.kind!r}")


@dataclass(frozen=True)
class ExactProbability:
    p: Fraction
    n_configs: int
    n_satisfying: int | None

    @property
    def numerator(self) -> int:
        return self.p.numerator

    @property
    def denominator(self) -> int:
        return self.p.denominator

    def to_json(self) -> dict:
        return {"num": self.p.numerator, "den": self.p.denominator,
                "configs": self.n_configs}


DEFAULT_ENUMERATION_CAP = 1 << 24


def exact_event_probability(
    event: EventSpec,
    dist: EdgeDistribution,
    box: LatticeBox,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> ExactProbability:
    """Exact probability of an event under a finite-support law.

    Enumerates weight configurations edge by edge.  Only edges the event can
    see are enumerated (for region-restricted passage events the rest of the
    box is marginalised away exactly).  Probabilities are exact rationals.
    """
    if not dist.is_finite_support:
        raise ValueError("the enumeration oracle needs a finite-support law")
    values, probs = dist.atoms()
    s = len(values)
    pred, edge_mask = _predicate(event, box, dist)
    live = np.nonzero(edge_mask)[0]
    m = len(live)
    required = s ** m
    if required > cap:
        raise CapExceededError(required, cap)

    w = np.full(box.n_edges, values[0])
    uniform = all(p == probs[0] for p in probs)
    count = 0
    total_p = Fraction(0)
    vals = np.asarray(values)
    for combo in itertools.product(range(s), repeat=m):
        w[live] = vals[list(combo)]
        if pred(w):
            if uniform:
                count += 1
            else:
                cp = Fraction(1)
                for i in combo:
                    cp *= probs[i]
                total_p += cp
    if uniform:
        return ExactProbability(p=Fraction(count, required), n_configs=required,
                                n_satisfying=count)
    return ExactProbability(p=total_p, n_configs=required, n_satisfying=None)


# ---------------------------------------------------------------------------
# Monte-Carlo companion


def wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("need at least one sample")
    phat = k / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class MCEstimate:
    p_hat: float
    successes: int
    samples: int
    ci_low: float
    ci_high: float

    def to_json(self) -> dict:
        return {"p_mc": self.p_hat, "successes": self.successes,
                "samples": self.samples, "ci": [self.ci_low, self.ci_high]}


def monte_carlo_event_probability(
    event: EventSpec,
    dist: EdgeDistribution,
    box: LatticeBox,
    samples: int,
    seed: int = 0,
) -> MCEstimate:
    """Monte-Carlo frequency of an event, with a Wilson confidence interval."""
    from fpplab.model import sample_weights

    pred, _ = _predicate(event, box, dist)
    rep_seeds = np.random.SeedSequence(seed).generate_state(samples, np.uint64)
    k = 0
    for i in range(samples):
        f = sample_weights(dist, box, int(rep_seeds[i]))
        if pred(f.weights):
            k += 1
    lo, hi = wilson_interval(k, samples)
    return MCEstimate(p_hat=k / samples, successes=k, samples=samples, ci_low=lo, ci_high=hi)


def validate_decreasing(
    event: EventSpec,
    dist: EdgeDistribution,
    box: LatticeBox,
    trials: int = 32,
    seed: int = 0,
) -> int:
    """Count monotone-perturbation violations of a claimed decreasing event.

    Samples a field, bumps one random edge weight upward, and checks the
    indicator never flips from false to true.  Returns the violation count
    (zero for genuinely decreasing events).
    """
    from fpplab.model import sample_weights

    pred, _ = _predicate(event, box, dist)
    rng = np.random.default_rng(seed)
    sup = dist.support_supremum()
    bump_to = sup if math.isfinite(sup) else None
    violations = 0
    for i in range(trials):
        f = sample_weights(dist, box, int(rng.integers(0, 2**63)))
        before = pred(f.weights)
        w2 = f.weights.copy()
        e = int(rng.integers(0, box.n_edges))
        w2[e] = bump_to if bump_to is not None else w2[e] + 1.0
        after = pred(w2)
        if after and not before:
            violations += 1
    return violations


# ---------------------------------------------------------------------------
# supermultiplicativity (in-box surrogate)


@dataclass(frozen=True)
class FKGReport:
    lhs: Fraction
    factor_first: Fraction
    factor_second: Fraction
    rhs: Fraction
    slack: Fraction

    def to_json(self) -> dict:
        def enc(q):
            return {"num": q.numerator, "den": q.denominator}

        return {"lhs": enc(self.lhs), "factor_first": enc(self.factor_first),
                "factor_second": enc(self.factor_second), "rhs": enc(self.rhs),
                "slack": enc(self.slack)}


def fkg_supermultiplicativity_check(
    dist: EdgeDistribution,
    box: LatticeBox,
    x1,
    x2,
    t1: float,
    t2: float,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> FKGReport:
    """Exact check of P(T(0, x1+x2) <= t1+t2) >= P(T(0, x1) <= t1) P(T(x1, x1+x2) <= t2).

    This is the in-box surrogate of supermultiplicativity: the second factor
    keeps the translated endpoints instead of invoking stationarity, because
    a finite box is not translation invariant.  Both factor events are
    decreasing in the weights and their intersection forces the left event
    through the triangle inequality, so the slack is provably nonnegative.
    """
    if not dist.is_finite_support:
        raise ValueError("the enumeration oracle needs a finite-support law")
    d = box.dimension
    x1 = np.asarray(x1, dtype=np.int64)
    x2 = np.asarray(x2, dtype=np.int64)
    origin = np.zeros(d, dtype=np.int64)
    x12 = x1 + x2
    if np.any(x12 < 0) or np.any(x12 > box.side):
        raise ValueError("x1 + x2 must stay in the box")

    values, probs = dist.atoms()
    s = len(values)
    required = s ** box.n_edges
    if required > cap:
        raise CapExceededError(required, cap)

    indptr, nbrs, eids = _adjacency(d, box.side)
    id0 = box.vertex_id(origin)
    id1 = box.vertex_id(x1)
    id12 = box.vertex_id(x12)
    w = np.empty(box.n_edges)
    vals = np.asarray(values)
    uniform = all(p == probs[0] for p in probs)

    cnt_lhs = Fraction(0)
    cnt_f1 = Fraction(0)
    cnt_f2 = Fraction(0)
    for combo in itertools.product(range(s), repeat=box.n_edges):
        w[:] = vals[list(combo)]
        if uniform:
            cp = Fraction(1, required)
        else:
            cp = Fraction(1)
            for i in combo:
                cp *= probs[i]
        d0, _ = _dijkstra_heap(indptr, nbrs, eids, w, id0, None, box.n_vertices)
        if d0[id12] <= t1 + t2:
            cnt_lhs += cp
        f1 = d0[id1] <= t1
        if f1:
            cnt_f1 += cp
        d1, _ = _dijkstra_heap(indptr, nbrs, eids, w, id1, None, box.n_vertices)
        if d1[id12] <= t2:
            cnt_f2 += cp
    rhs = cnt_f1 * cnt_f2
    return FKGReport(lhs=cnt_lhs, factor_first=cnt_f1, factor_second=cnt_f2,
                     rhs=rhs, slack=cnt_lhs - rhs)


# ---------------------------------------------------------------------------
# analytic bounds


def crude_lower_bound(dist: EdgeDistribution, u, v, t: float):
    """nu([a, t]) ** |u - v|_1, a lower bound for P(T(u, v) <= t |u - v|_1).

    Exact rational when the law's CDF is rational at t; float otherwise.
    Requires t >= the support infimum (below it the bound is void).
    """
    if t < dist.support_infimum:
        raise ValueError("t must be at least the support infimum")
    hops = int(np.abs(np.asarray(u, dtype=np.int64) - np.asarray(v, dtype=np.int64)).sum())
    q = dist.cdf_fraction(t)
    if q is not None:
        return q ** hops
    return dist.cdf(t) ** hops


def iid_sum_lower_tail_rate(dist: EdgeDistribution, zeta: float, n: int) -> float:
    """-(1/n) log P(sum of n i.i.d. weights <= n zeta), exact for finite laws.

    This finite-n quantity decreases to the Legendre-transform rate as n
    grows; it is the sharp comparison point for box estimates at finite n.
    """
    if not dist.is_finite_support:
        raise ValueError("exact lower-tail sums need a finite-support law")
    values, probs = dist.atoms()
    # dynamic programming over exact (value, probability) pairs
    layer: dict[float, Fraction] = {0.0: Fraction(1)}
    for _ in range(n):
        nxt: dict[float, Fraction] = {}
        for tot, p in layer.items():
            for v, q in zip(values, probs):
                key = tot + v
                nxt[key] = nxt.get(key, Fraction(0)) + p * q
        layer = nxt
    p_tail = sum((p for tot, p in layer.items() if tot <= zeta * n), Fraction(0))
    if p_tail == 0:
        return math.inf
    return -math.log(float(p_tail)) / n


def cramer_rate(dist: EdgeDistribution, zeta: float, tol: float = 1e-10) -> float:
    """Lower-tail large-deviation rate of an i.i.d. sum at level zeta.

    The Legendre transform sup over lam <= 0 of lam zeta - log E[exp(lam tau)].
    Zero at and above the mean; -log nu({a}) at the support infimum a when an
    atom sits there, infinite there otherwise; +inf below the support.
    """
    a = dist.support_infimum
    if zeta < a:
        return math.inf
    mean = dist.mean()
    if zeta >= mean:
        return 0.0
    if zeta == a:
        if dist.is_finite_support:
            values, probs = dist.atoms()
            atom = sum((p for v, p in zip(values, probs) if v == a), Fraction(0))
            if atom > 0:
                return -math.log(float(atom))
        return math.inf

    def neg_obj(lam: float) -> float:
        return -(lam * zeta - dist.log_mgf(lam))

    best = 0.0
    L = 1.0
    while True:
        res = minimize_scalar(neg_obj, bounds=(-L, 0.0), method="bounded",
                              options={"xatol": tol * 1e-3})
        val = -res.fun
        hugging = res.x < -0.99 * L
        improved = val > best + tol * 0.1
        best = max(best, val)
        if L >= 1e8 or (not hugging and not improved):
            break
        L *= 4.0
    return max(0.0, best)


def chernoff_upper_tail(dist: EdgeDistribution, lam: float, eps: float, n: int, hops: int) -> float:
    """Chernoff bound exp(-lam eps n) E[exp(lam tau)]^hops for the upper tail
    of the passage time: any fixed path with the given hop count witnesses
    P(T >= eps n) <= P(path sum >= eps n) <= this bound."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    if eps <= 0:
        raise ValueError("eps must be positive")
    log_bound = -lam * eps * n + hops * dist.log_mgf(lam)
    return math.exp(min(log_bound, 700.0))


def chernoff_best_lambda(
    dist: EdgeDistribution,
    eps: float,
    n: int,
    hops: int,
    lam_grid: Sequence[float] | None = None,
) -> tuple[float, float]:
    """Grid-optimised Chernoff bound; returns (best lam, best bound)."""
    if lam_grid is None:
        lam_grid = np.geomspace(1e-3, 64.0, 121)
    best_lam, best_bound = None, math.inf
    for lam in lam_grid:
        try:
            bnd = chernoff_upper_tail(dist, float(lam), eps, n, hops)
        except ValueError:
            continue
        if bnd < best_bound:
            best_lam, best_bound = float(lam), bnd
    if best_lam is None:
        raise ValueError("no finite bound on the grid (mgf diverges everywhere)")
    return best_lam, best_bound
