"""Lower-tail rate functional of a norm-plus-highways metric.

The functional admits three expressions: a sum of integrals along the
highway network's geodesics, an intrinsic integral against one-dimensional
Hausdorff measure over the union of the highways, and a supremum over
injective pairwise-disjoint path families.  For piecewise-linear highways
with piecewise-constant discounts all three reduce to finite sums of
segment terms, so they can be cross-checked at tight tolerances.  The
module also provides the strict-monotonicity probe (slower metrics have
strictly larger functionals) and an empirical large-deviation trend table
for qualitative comparison against the functional value.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from fpplab._segments import fvec, merge_intervals, segment_intersection
from fpplab.geometry import (
    GeometryError,
    HighwayNetwork,
    LipschitzPath,
    NormPlusHighways,
    _as_eval,
    _norm_factory,
    hausdorff_integrate,
    metric_derivative,
    network_from_highways,
    paths_pairwise_disjoint,
)
from fpplab.model import EdgeDistribution, LatticeBox
from fpplab.oracle import (
    CapExceededError,
    EventSpec,
    exact_event_probability,
    monte_carlo_event_probability,
)


class FunctionalError(ValueError):
    """A functional-level contract failed (ordering, consistency, domain)."""


def _map_ordered(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# rate integrands
# ---------------------------------------------------------------------------


class AnalyticRate:
    """Closed-form rate integrand J(u, zeta) = scale * (g_J(u) - zeta)^+.

    g_J is a weighted l1 norm, so J is convex, jointly positively
    1-homogeneous in (u, zeta), and nonincreasing in zeta, the structural
    properties the functional formulas rely on.  Using a closed form keeps
    the functional machinery testable at machine precision, away from the
    statistical noise of estimated rate surfaces.
    """

    def __init__(self, weights, scale: float = 1.0):
        self.weights = np.asarray(weights, dtype=float)
        if self.weights.ndim != 1 or np.any(self.weights <= 0):
            raise FunctionalError("rate weights must be positive, one per axis")
        if not (scale > 0 and math.isfinite(scale)):
            raise FunctionalError("scale must be positive and finite")
        self.scale = float(scale)
        self.gnorm = _norm_factory(self.weights)

    def __call__(self, u, zeta: float) -> float:
        return self.scale * max(float(self.gnorm(u)) - float(zeta), 0.0)

    def to_json(self) -> dict:
        return {
            "kind": "analytic",
            "weights": [float(w) for w in self.weights],
            "scale": self.scale,
        }


class SurfaceRate:
    """Rate integrand backed by a tabulated surface.

    Tangent directions are snapped onto the surface's direction grid by
    angular nearest neighbours; in dimension two the two bracketing grid
    directions are blended linearly by angle, in higher dimensions the
    single nearest direction is used.  The speed argument is matched by
    homogeneity (the query is rescaled so the direction lands on the
    tabulated primitive vector).  This is an approximation: the error is
    bounded by the surface's modulus of continuity over one angular cell,
    so refine the direction grid to tighten it.  Below the tabulated speed
    range the boundary cell's value is used and the query is counted in
    ``n_flagged``.
    """

    def __init__(self, surface):
        self.surface = surface
        dirs = [np.asarray(p, dtype=float) for p in surface.directions()]
        if not dirs:
            raise FunctionalError("surface has no tabulated directions")
        self.dim = dirs[0].shape[0]
        self._dirs = dirs
        if self.dim == 2:
            order = np.argsort([math.atan2(p[1], p[0]) for p in dirs])
            self._dirs = [dirs[i] for i in order]
        self.n_flagged = 0

    def _ray_value(self, p: np.ndarray, u_abs: np.ndarray, zeta: float) -> float:
        # match scales: J(u, zeta) = s * J(p, zeta / s) for s = |u|_1 / |p|_1
        s = float(np.sum(u_abs)) / float(np.sum(p))
        val, flag = self.surface.value_at(p, float(zeta) / s)
        if val is None:
            # below the tabulated range; the steepest tabulated cell is the
            # best available stand-in
            cells = self.surface.ray(tuple(int(c) for c in p))
            val = cells[0].value * 1.0
            flag = "below tabulated speeds"
        if flag is not None:
            self.n_flagged += 1
        return s * float(val)

    def __call__(self, u, zeta: float) -> float:
        u_abs = np.abs(np.asarray(u, dtype=float))
        if not np.any(u_abs):
            return 0.0
        if self.dim == 2:
            ang = math.atan2(u_abs[1], u_abs[0])
            angs = [math.atan2(p[1], p[0]) for p in self._dirs]
            j = int(np.searchsorted(angs, ang))
            if j == 0 or angs[min(j, len(angs) - 1)] == ang:
                j = min(j, len(angs) - 1)
                return self._ray_value(self._dirs[j], u_abs, zeta)
            if j >= len(angs):
                return self._ray_value(self._dirs[-1], u_abs, zeta)
            a0, a1 = angs[j - 1], angs[j]
            t = (ang - a0) / (a1 - a0)
            v0 = self._ray_value(self._dirs[j - 1], u_abs, zeta)
            v1 = self._ray_value(self._dirs[j], u_abs, zeta)
            return (1.0 - t) * v0 + t * v1
        scores = [
            float(p @ u_abs) / (float(np.linalg.norm(p)) * float(np.linalg.norm(u_abs)))
            for p in self._dirs
        ]
        return self._ray_value(self._dirs[int(np.argmax(scores))], u_abs, zeta)

    def to_json(self) -> dict:
        return {"kind": "surface", "n_directions": len(self._dirs)}


# ---------------------------------------------------------------------------
# path families
# ---------------------------------------------------------------------------


@dataclass
class PathFamily:
    """A finite family of injective, pairwise essentially disjoint paths.

    The validity certificate is recomputed from the paths at construction
    and again by ``validate``; a caller-supplied certificate is never
    trusted.
    """

    paths: list[LipschitzPath]
    certificate: dict = field(init=False)

    def __post_init__(self):
        self.paths = list(self.paths)
        self.certificate = self.validate()

    def validate(self) -> dict:
        for i, p in enumerate(self.paths):
            if not p.is_injective():
                raise GeometryError(f"family path {i} is not injective")
        ok, touches = paths_pairwise_disjoint(self.paths, allow_touch=True)
        if not ok:
            raise GeometryError("family paths overlap on positive length")
        cert = {
            "n_paths": len(self.paths),
            "injective": True,
            "pairwise_disjoint": True,
            "n_touch_points": touches,
        }
        self.certificate = cert
        return cert

    @classmethod
    def from_network(cls, net: HighwayNetwork) -> "PathFamily":
        return cls(paths=list(net.paths))


# ---------------------------------------------------------------------------
# the three expressions
# ---------------------------------------------------------------------------


def _check_network_of(D, net: HighwayNetwork, tol: float):
    """Spot-check that the network's distance tables describe ``D``.

    Endpoint and quartile distances along every path must match the stored
    cumulative table, which is what makes the stored discounts meaningful.
    """
    ev = _as_eval(D)
    if hasattr(D, "weights") and not np.allclose(np.asarray(D.weights, float), net.weights):
        raise GeometryError("network weights disagree with the metric's norm")
    for k, (path, (ts, cum)) in enumerate(zip(net.paths, net.cum_tables)):
        start = path.point_at(0.0)
        for q in (0.25, 0.5, 0.75, 1.0):
            t = q * path.length_l1
            want = float(np.interp(t, ts, cum))
            got = float(ev(start, path.point_at(t)))
            if abs(got - want) > tol * (1.0 + abs(want)):
                raise GeometryError(
                    f"network path {k} distance table disagrees with the metric "
                    f"at parameter {t:.6g}: {got:.12g} vs {want:.12g}"
                )


def functional_geodesic_sum(D, net: HighwayNetwork, J, validate: bool = True,
                            net_tol: float = 1e-6, threads: int = 1) -> float:
    """Sum over network geodesics of the rate of their discounted speed.

    Each highway contributes the integral of J(tangent, D-speed) along
    itself.  With piecewise-linear geometry and piecewise-constant
    discounts the integrand is constant per table interval, so the value
    is an exact finite sum: by joint homogeneity the interval term is
    J(increment vector, lam * g(increment vector)).
    """
    if validate:
        net.validate()
        _check_network_of(D, net, net_tol)
    gnorm = _norm_factory(net.weights)

    def one_highway(k: int) -> float:
        path = net.paths[k]
        total = 0.0
        for t0, t1, lam in net.discount_profile(k):
            if t1 <= t0:
                continue
            v = path.point_at(t1) - path.point_at(t0)
            total += float(J(v, lam * float(gnorm(v))))
        return total

    return float(sum(_map_ordered(one_highway, range(len(net.paths)), threads)))


def functional_intrinsic(D, net: HighwayNetwork, J, order: int = 8,
                         validate: bool = True, net_tol: float = 1e-6,
                         threads: int = 1) -> float:
    """Hausdorff-measure expression of the functional.

    The integrand at a point of a highway is J evaluated at the unit
    tangent and the metric speed in that direction; off the highways the
    metric speed equals the norm along every direction, the pointwise
    maximum defining the integrand vanishes, and the contribution is the
    analytic zero (integrating numerically over the off-highway set would
    be meaningless, its Hausdorff measure is infinite).  Quadrature per
    constant-discount piece is Gauss-Legendre, exact for the piecewise
    constant integrand.
    """
    if validate:
        net.validate()
        _check_network_of(D, net, net_tol)
    gnorm = _norm_factory(net.weights)

    def one_highway(k: int) -> float:
        path = net.paths[k]
        total = 0.0
        for t0, t1, lam in net.discount_profile(k):
            if t1 <= t0:
                continue
            piece = path.subpath(Fraction(t0), Fraction(t1))

            def f(_x, u2, lam=lam):
                return J(u2, lam * float(gnorm(u2)))

            total += hausdorff_integrate([piece], f, order=order, validate=False)
        return total

    return float(sum(_map_ordered(one_highway, range(len(net.paths)), threads)))


def _piece_overlaps(D: NormPlusHighways, p0: np.ndarray, p1: np.ndarray):
    """Collinear overlaps of the segment [p0, p1] with the metric's highways.

    Returns merged intervals in the segment's own l1 parameter together
    with per-subinterval discounts: a list of (a, b, lam) with a, b exact
    Fractions in [0, L1].  Point intersections carry no length and are
    dropped; the highways are pairwise disjoint so overlap intervals from
    different highways can only share endpoints.
    """
    fp0, fp1 = fvec(p0), fvec(p1)
    seg_l1 = sum(abs(x - y) for x, y in zip(fp0, fp1))
    out = []
    for hw in D.highways:
        for i in range(len(hw.ts) - 1):
            q0, q1 = fvec(hw.pts[i]), fvec(hw.pts[i + 1])
            hit = segment_intersection(fp0, fp1, q0, q1)
            if hit is None or hit[0] != "overlap":
                continue
            (a0, a1), (u0, u1) = hit[1], hit[2]
            if a1 <= a0:
                continue
            # both parameters are fractions of their segment's l1 length and
            # the segments are collinear, so l1 length is shared
            t_lo = a0 * seg_l1
            t_hi = a1 * seg_l1
            h_len = Fraction(float(hw.ts[i + 1])) - Fraction(float(hw.ts[i]))
            h_lo = Fraction(float(hw.ts[i])) + min(u0, u1) * h_len
            h_hi = Fraction(float(hw.ts[i])) + max(u0, u1) * h_len
            # split at discount breakpoints inside the highway range
            cuts = [h_lo]
            for end, _lam in hw.profile:
                fe = Fraction(float(end))
                if h_lo < fe < h_hi:
                    cuts.append(fe)
            cuts.append(h_hi)
            for c0, c1 in zip(cuts[:-1], cuts[1:]):
                if c1 <= c0:
                    continue
                lam = hw.lam_at(float((c0 + c1) / 2))
                frac_lo = (c0 - h_lo) / (h_hi - h_lo)
                frac_hi = (c1 - h_lo) / (h_hi - h_lo)
                out.append((t_lo + frac_lo * (t_hi - t_lo),
                            t_lo + frac_hi * (t_hi - t_lo), lam))
    out.sort(key=lambda r: (r[0], r[1]))
    return out, seg_l1


def functional_sup_lower_bound(D, J, family: PathFamily,
                               points_per_piece: int = 8,
                               threads: int = 1) -> float:
    """Contribution of one admissible path family to the supremum formula.

    Each family member contributes the integral of J(tangent, metric speed)
    along itself.  For a norm-plus-highways metric the speed is analytic:
    the discounted norm on collinear overlaps with a highway, the plain
    norm elsewhere (a transversal crossing has zero length and no
    contribution), so each linear piece reduces to exact segment terms.
    For other metrics the speed falls back to ``metric_derivative`` at
    composite midpoints, ``points_per_piece`` per piece.

    Any valid family yields at most the geodesic-sum value, with equality
    when the family is the highway network itself; that contract is
    enforced by ``functional_report``, not here.
    """
    family.validate()

    analytic = isinstance(D, NormPlusHighways)
    gnorm = D.gnorm if analytic else None

    def one_path(path: LipschitzPath) -> float:
        total = 0.0
        for p0, p1, t0, t1 in path.pieces():
            v = p1 - p0
            l1 = float(np.abs(v).sum())
            if l1 == 0.0:
                continue
            if analytic:
                overlaps, seg_l1 = _piece_overlaps(D, p0, p1)
                g_v = float(gnorm(v))
                for a, b, lam in overlaps:
                    frac = float(b - a) / float(seg_l1)
                    total += frac * float(J(v, lam * g_v))
                covered = sum((b - a for a, b, _ in overlaps), Fraction(0))
                off = float(seg_l1 - covered) / float(seg_l1)
                if off > 0:
                    total += off * float(J(v, g_v))
            else:
                u = v / l1
                h = (t1 - t0) / points_per_piece
                for j in range(points_per_piece):
                    t = t0 + (j + 0.5) * h
                    speed = metric_derivative(D, path, t).value
                    total += h * float(J(u, speed))
        return total

    return float(sum(_map_ordered(one_path, family.paths, threads)))


# ---------------------------------------------------------------------------
# combined report
# ---------------------------------------------------------------------------


@dataclass
class FunctionalReport:
    """The three expressions of the functional with their pairwise gaps."""

    geodesic_sum: float
    intrinsic: float
    sup_bound: float
    family_size: int
    order: int
    n_highways: int
    cross_tol: float
    sup_tol: float

    @property
    def delta_intrinsic(self) -> float:
        return self.intrinsic - self.geodesic_sum

    @property
    def delta_sup(self) -> float:
        return self.sup_bound - self.geodesic_sum

    def to_json(self) -> dict:
        return {
            "geodesic_sum": self.geodesic_sum,
            "intrinsic": self.intrinsic,
            "sup_bound": self.sup_bound,
            "delta_intrinsic": self.delta_intrinsic,
            "delta_sup": self.delta_sup,
            "family_size": self.family_size,
            "quadrature_order": self.order,
            "n_highways": self.n_highways,
            "cross_tol": self.cross_tol,
            "sup_tol": self.sup_tol,
        }


def functional_report(D, net: HighwayNetwork, J, family: PathFamily | None = None,
                      order: int = 8, cross_tol: float = 1e-9,
                      sup_tol: float = 1e-9, net_tol: float = 1e-6,
                      threads: int = 1) -> FunctionalReport:
    """Evaluate all three expressions and enforce their mutual contracts.

    The supremum expression is evaluated on ``family`` (default: the
    network itself, which attains the value).  Raises ``FunctionalError``
    if the intrinsic value drifts from the geodesic sum beyond the relative
    cross-check tolerance, or if the family exceeds the geodesic sum.
    """
    net.validate()
    _check_network_of(D, net, net_tol)
    if family is None:
        family = PathFamily.from_network(net)
    geo = functional_geodesic_sum(D, net, J, validate=False, threads=threads)
    intr = functional_intrinsic(D, net, J, order=order, validate=False,
                                threads=threads)
    sup = functional_sup_lower_bound(D, J, family, threads=threads)
    scale = max(abs(geo), abs(intr), 1e-300)
    if abs(intr - geo) > cross_tol * max(1.0, scale):
        raise FunctionalError(
            f"intrinsic and geodesic-sum expressions disagree: "
            f"{intr:.15g} vs {geo:.15g}"
        )
    if sup > geo + sup_tol * max(1.0, scale):
        raise FunctionalError(
            f"path family exceeds the geodesic-sum value: {sup:.15g} > {geo:.15g}"
        )
    return FunctionalReport(
        geodesic_sum=geo, intrinsic=intr, sup_bound=sup,
        family_size=len(family.paths), order=order,
        n_highways=len(net.paths), cross_tol=cross_tol, sup_tol=sup_tol,
    )


# ---------------------------------------------------------------------------
# strict monotonicity
# ---------------------------------------------------------------------------


@dataclass
class MonotonicityReport:
    value_smaller: float     # functional of the smaller metric
    value_larger: float      # functional of the larger metric
    margin: float
    n_pairs: int
    max_order_violation: float
    witness: tuple | None

    def to_json(self) -> dict:
        return {
            "value_smaller_metric": self.value_smaller,
            "value_larger_metric": self.value_larger,
            "margin": self.margin,
            "n_pairs": self.n_pairs,
            "max_order_violation": self.max_order_violation,
            "witness": None if self.witness is None else
                [[float(c) for c in self.witness[0]],
                 [float(c) for c in self.witness[1]]],
        }


def strict_monotonicity_probe(D1: NormPlusHighways, D2: NormPlusHighways, J,
                              n_pairs: int = 48, seed: int = 0,
                              margin: float = 1e-9,
                              order_tol: float = 1e-12) -> MonotonicityReport:
    """Check that a strictly smaller metric has a strictly larger functional.

    ``D1 <= D2`` is verified on a sampled pair grid and a strict witness
    pair is required (equal metrics are rejected, the claim is about
    distinct ones).  Both functionals are evaluated through each metric's
    own highways; the smaller metric must win by more than ``margin``.
    """
    from scipy.stats import qmc

    if D1.dim != D2.dim:
        raise FunctionalError("metrics live in different dimensions")
    dim = D1.dim
    pts = [np.zeros(dim), np.ones(dim), np.full(dim, 0.5)]
    if n_pairs > 0:
        sampler = qmc.Halton(d=2 * dim, scramble=True, seed=seed)
        for row in sampler.random(n_pairs):
            pts.append(row[:dim])
            pts.append(row[dim:])
    pairs = [(a, b) for i, a in enumerate(pts) for b in pts[i + 1:]]

    worst = 0.0
    witness = None
    gap = 0.0
    for a, b in pairs:
        v1 = float(D1.evaluate(a, b))
        v2 = float(D2.evaluate(a, b))
        worst = max(worst, v1 - v2)
        if v2 - v1 > gap:
            gap = v2 - v1
            witness = (a, b)
    if worst > order_tol:
        raise FunctionalError(
            f"ordering violated on a sampled pair: D1 - D2 = {worst:.3g}"
        )
    if witness is None or gap <= order_tol:
        raise FunctionalError("metrics are not distinct on the sampled pairs")

    net1 = network_from_highways(D1)
    net2 = network_from_highways(D2)
    val1 = functional_geodesic_sum(D1, net1, J, validate=False)
    val2 = functional_geodesic_sum(D2, net2, J, validate=False)
    if not math.isfinite(val2):
        raise FunctionalError("functional of the larger metric is not finite")
    if not val1 > val2 + margin:
        raise FunctionalError(
            f"strict monotonicity failed: {val1:.15g} vs {val2:.15g} "
            f"(margin {margin:g})"
        )
    return MonotonicityReport(
        value_smaller=val1, value_larger=val2, margin=margin,
        n_pairs=len(pairs), max_order_violation=worst, witness=witness,
    )


# ---------------------------------------------------------------------------
# empirical large-deviation trend
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LDTrendRow:
    n: int
    method: str
    p: float
    p_exact: Fraction | None
    rate: float | None          # -(1/n) log p; None when p == 0 exactly
    ci: tuple[float, float] | None
    censored: bool
    samples: int
    hits: int | None
    seed: int

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "method": self.method,
            "p": self.p,
            "p_exact": None if self.p_exact is None else
                {"num": self.p_exact.numerator, "den": self.p_exact.denominator},
            "rate": None if self.rate is None or not math.isfinite(self.rate)
                else self.rate,
            "rate_is_infinite": self.rate is not None and math.isinf(self.rate),
            "ci": None if self.ci is None else
                [self.ci[0], None if math.isinf(self.ci[1]) else self.ci[1]],
            "censored": self.censored,
            "samples": self.samples,
            "hits": self.hits,
            "seed": self.seed,
        }


@dataclass
class LDTrendTable:
    rows: list[LDTrendRow]
    eps: float
    functional_value: float | None

    def to_json(self) -> dict:
        return {
            "eps": self.eps,
            "functional_value": self.functional_value,
            "comparison": "qualitative only; convergence of finite-box rates "
                          "to the functional is not observable at these sizes",
            "rows": [r.to_json() for r in self.rows],
        }


def _rate_from_p(p: float, n: int) -> float:
    if p <= 0.0:
        return math.inf
    return max(-math.log(p) / n, 0.0) + 0.0


def empirical_ld_trend(D, dist: EdgeDistribution, eps: float,
                       n_ladder: Sequence[int], dim: int | None = None,
                       samples: int = 200, seed: int = 0,
                       method: str = "auto", enum_cap: int = 1 << 13,
                       grid=None, functional_value: float | None = None) -> LDTrendTable:
    """Probability that the rescaled box metric sits below ``D + eps``.

    Per ladder rung the event "every sampled vertex pair satisfies
    T-hat_n(x, y) <= D(x, y) + eps" is measured exactly when the law has
    finite support and the configuration space fits under ``enum_cap``,
    and by Monte Carlo otherwise.  The table reports -(1/n) log p next to
    a functional value for qualitative comparison only; no convergence
    claim is attached at desk scale.
    """
    if method not in ("auto", "exact", "mc"):
        raise ValueError("method must be auto, exact, or mc")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if dim is None:
        if hasattr(D, "dim"):
            dim = int(D.dim)
        elif hasattr(D, "weights"):
            dim = int(len(D.weights))
        else:
            raise ValueError("pass dim explicitly for a bare metric callable")
    ev = _as_eval(D)
    rungs = [int(n) for n in n_ladder]
    root = np.random.SeedSequence(seed)
    rows = []
    for n, seq in zip(rungs, root.spawn(max(len(rungs), 1))):
        box = LatticeBox(dimension=dim, side=n)
        event = EventSpec.ld_lower(lambda x, y: float(ev(x, y)), eps, grid=grid)
        fits = (dist.is_finite_support
                and len(dist.atoms()[0]) ** box.n_edges <= enum_cap)
        use_exact = method == "exact" or (method == "auto" and fits)
        if use_exact:
            res = exact_event_probability(event, dist, box, cap=enum_cap)
            rows.append(LDTrendRow(
                n=n, method="exact-oracle", p=float(res.p), p_exact=res.p,
                rate=_rate_from_p(float(res.p), n), ci=None, censored=False,
                samples=res.n_configs, hits=None, seed=seed,
            ))
        else:
            sub_seed = int(seq.generate_state(1)[0])
            mc = monte_carlo_event_probability(event, dist, box, samples,
                                               seed=sub_seed)
            lo, hi = mc.ci_low, mc.ci_high
            if mc.successes == 0:
                # censored: only a one-sided lower rate bound is available
                bound = _rate_from_p(hi, n)
                rows.append(LDTrendRow(
                    n=n, method="monte-carlo", p=0.0, p_exact=None,
                    rate=None, ci=(bound, math.inf), censored=True,
                    samples=samples, hits=0, seed=sub_seed,
                ))
            else:
                rows.append(LDTrendRow(
                    n=n, method="monte-carlo", p=mc.p_hat, p_exact=None,
                    rate=_rate_from_p(mc.p_hat, n),
                    ci=(_rate_from_p(hi, n), _rate_from_p(lo, n)),
                    censored=False, samples=samples, hits=mc.successes,
                    seed=sub_seed,
                ))
    return LDTrendTable(rows=rows, eps=float(eps),
                        functional_value=functional_value)
