"""Point estimates, tabulation, and structural extension of the lower-tail
rate function, plus time-constant estimation.

A rate point is the finite-scale quantity -(1/n) log P(T_box(0, nx) <= n zeta),
estimated exactly by enumeration on tiny instances and by Monte Carlo with
censoring elsewhere.  Finite-scale values upper-bound the limit, so the
running infimum over a scale ladder is the best available upper estimate.
The surface extension applies the limit function's known structure
(reflection symmetry, homogeneity, domination monotonicity, convexity in the
speed) as value-lowering transforms on the table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from .model import LatticeBox, sample_weights
from .oracle import (
    CapExceededError,
    EventSpec,
    exact_event_probability,
    wilson_interval,
)
from .passage_time import restricted_passage_time

_Z95 = 1.959963984540054


class SurfaceConflictError(ValueError):
    """Duplicate surface cells with incompatible confidence intervals."""

    def __init__(self, conflicts):
        super().__init__(f"{len(conflicts)} conflicting duplicate cells")
        self.conflicts = conflicts


def _map_ordered(fn, items, threads: int = 1):
    if threads and threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(it) for it in items]


def _canonical_direction(x) -> np.ndarray:
    x = np.asarray(x, dtype=int)
    if x.ndim != 1 or np.all(x == 0):
        raise ValueError("direction must be a nonzero integer vector")
    return np.abs(x)


@dataclass(frozen=True)
class RatePoint:
    """One estimated cell of the rate function.

    ``estimate`` is -(1/n) log p in nats; ``ci`` is the induced interval on
    the rate (decreasing transform of the Wilson interval on p).  A censored
    point saw zero hits: ``estimate`` is then the one-sided lower bound from
    the upper Wilson limit and the interval is unbounded above.
    """

    x: tuple[int, ...]
    zeta: float
    n: int
    estimate: float
    ci: tuple[float, float]
    method: str
    censored: bool = False
    p_hat: float | None = None
    p_exact: Fraction | None = None
    samples: int | None = None
    hits: int | None = None
    seed: int | None = None

    def to_json(self) -> dict:
        out = {
            "x": list(self.x),
            "zeta": self.zeta,
            "n": self.n,
            "estimate": None if math.isinf(self.estimate) else self.estimate,
            "ci": [self.ci[0], None if math.isinf(self.ci[1]) else self.ci[1]],
            "method": self.method,
            "censored": self.censored,
        }
        if self.p_exact is not None:
            out["p_exact"] = {"num": self.p_exact.numerator, "den": self.p_exact.denominator}
        if self.p_hat is not None:
            out["p_mc"] = self.p_hat
            out["samples"] = self.samples
            out["hits"] = self.hits
            out["seed"] = self.seed
        return out


def _atom_at_infimum(dist) -> Fraction:
    if dist.is_finite_support:
        values, probs = dist.atoms()
        return sum((p for v, p in zip(values, probs)
                    if Fraction(float(v)) == dist.support_infimum), Fraction(0))
    return Fraction(0)


def _domain_check(dist, x: np.ndarray, zeta: float):
    """Speeds strictly above a |x|_1 are always admissible; the boundary speed
    itself only when the law has an atom at its infimum, since otherwise the
    event has probability zero at every scale."""
    l1 = int(np.abs(x).sum())
    threshold = dist.support_infimum * l1
    z = Fraction(float(zeta))
    if z < threshold or (z == threshold and _atom_at_infimum(dist) == 0):
        raise ValueError(
            f"zeta={zeta} is below (or at, with no atom) the trivial threshold "
            f"{float(threshold)} for x={x.tolist()}"
        )
    return l1


def estimate_rate_point(
    dist,
    x,
    zeta: float,
    n: int,
    samples: int = 400,
    seed: int = 0,
    method: str = "auto",
    region=None,
    max_edges: int = 1 << 22,
    enum_cap: int = 1 << 13,
    threads: int = 1,
) -> RatePoint:
    """Estimate -(1/n) log P(T(0, n|x|) <= n zeta) on the box of side n max|x|.

    The direction is reflected to nonnegative coordinates first; coordinate
    sign flips leave the weight law invariant, so this loses nothing.  With
    ``method='auto'`` an exact enumeration oracle is used whenever the
    configuration count fits ``enum_cap``, otherwise Monte Carlo over
    independent fields with a Wilson interval; a zero-hit outcome is returned
    censored.  ``region`` restricts the admissible paths (for thin-box
    ladders) and is passed through to both backends.
    """
    xv = _canonical_direction(x)
    _domain_check(dist, xv, zeta)
    if n < 1:
        raise ValueError("n must be at least 1")
    side = int(n * xv.max())
    d = xv.shape[0]
    box = LatticeBox(dimension=d, side=side)
    if box.n_edges > max_edges:
        raise CapExceededError(box.n_edges, max_edges)
    target = tuple(int(c) for c in n * xv)
    origin = (0,) * d
    t_budget = float(n * zeta)
    event = EventSpec.passage_time_at_most(origin, target, t_budget, region=region)

    if method not in ("auto", "exact", "mc"):
        raise ValueError(f"unknown method {method!r}")

    if method in ("auto", "exact") and dist.is_finite_support:
        try:
            res = exact_event_probability(event, dist, box, cap=enum_cap)
        except CapExceededError:
            if method == "exact":
                raise
            res = None
        if res is not None:
            p = res.p
            if p == 0:
                raise AssertionError(
                    "exact zero probability inside the domain; check the region")
            rate = max(-math.log(float(p)) / n, 0.0) + 0.0
            return RatePoint(x=tuple(int(c) for c in xv), zeta=float(zeta), n=n,
                             estimate=rate, ci=(rate, rate), method="exact-oracle",
                             p_exact=p)
    if method == "exact":
        raise ValueError("exact method requires a finite-support distribution")

    root = np.random.SeedSequence(seed)
    rep_seeds = root.generate_state(samples, dtype=np.uint64)

    def one(rep_seed) -> bool:
        field = sample_weights(dist, box, int(rep_seed))
        t = restricted_passage_time(field, origin, target, region=region)
        return bool(t <= t_budget + 1e-12)

    hits = int(sum(_map_ordered(one, rep_seeds, threads)))
    lo_p, hi_p = wilson_interval(hits, samples)
    if hits == 0:
        bound = -math.log(hi_p) / n
        return RatePoint(x=tuple(int(c) for c in xv), zeta=float(zeta), n=n,
                         estimate=bound, ci=(bound, math.inf), method="monte-carlo",
                         censored=True, p_hat=0.0, samples=samples, hits=0, seed=seed)
    p_hat = hits / samples
    est = max(-math.log(p_hat) / n, 0.0)
    ci = (max(-math.log(hi_p) / n, 0.0), math.inf if lo_p == 0 else -math.log(lo_p) / n)
    return RatePoint(x=tuple(int(c) for c in xv), zeta=float(zeta), n=n,
                     estimate=est, ci=ci, method="monte-carlo", p_hat=p_hat,
                     samples=samples, hits=hits, seed=seed)


def fekete_envelope(points: Sequence[RatePoint]) -> RatePoint:
    """Running infimum over an increasing scale ladder at a common (x, zeta).

    Each finite-scale value upper-bounds the limit, so the smallest one is the
    best upper estimate; its own interval is carried along unchanged.
    """
    if not points:
        raise ValueError("empty ladder")
    key = (points[0].x, points[0].zeta)
    ns = [p.n for p in points]
    for p in points:
        if (p.x, p.zeta) != key:
            raise ValueError("ladder mixes different (x, zeta) cells")
    if ns != sorted(ns) or len(set(ns)) != len(ns):
        raise ValueError("ladder scales must be strictly increasing")
    best = min(points, key=lambda p: p.estimate)
    return replace(best, method="fekete-envelope")


# ---------------------------------------------------------------------------
# time constant
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TimeConstantEstimate:
    x: tuple[int, ...]
    ns: tuple[int, ...]
    means: tuple[float, ...]          # per-scale means of T(0, n x)/n
    half_widths: tuple[float, ...]    # normal-approximation CI half widths
    mu_hat: float
    ci: tuple[float, float]
    bracket: tuple[float, float]      # analytic [a |x|_1, E tau |x|_1]
    non_increasing_within_ci: bool

    def to_json(self) -> dict:
        return {
            "x": list(self.x),
            "ns": list(self.ns),
            "means": list(self.means),
            "half_widths": list(self.half_widths),
            "mu_hat": self.mu_hat,
            "ci": list(self.ci),
            "bracket": list(self.bracket),
            "non_increasing_within_ci": self.non_increasing_within_ci,
        }


def estimate_time_constant(
    dist,
    x,
    n_ladder: Sequence[int],
    samples: int = 200,
    seed: int = 0,
    max_edges: int = 1 << 22,
    threads: int = 1,
) -> TimeConstantEstimate:
    """Per-scale means of T(0, nx)/n with the analytic norm bracket.

    The last rung's mean is reported as the point estimate.  Means along a
    growing ladder should not increase beyond joint CI wiggle (subadditivity
    of expectations); the report carries that check's outcome rather than
    enforcing it.
    """
    xv = _canonical_direction(x)
    d = xv.shape[0]
    l1 = int(np.abs(xv).sum())
    ns = [int(n) for n in n_ladder]
    if not ns or ns != sorted(ns):
        raise ValueError("n_ladder must be a nondecreasing nonempty sequence")
    means, halfs = [], []
    root = np.random.SeedSequence(seed)
    for n in ns:
        side = int(n * xv.max())
        box = LatticeBox(dimension=d, side=side)
        if box.n_edges > max_edges:
            raise CapExceededError(box.n_edges, max_edges)
        target = tuple(int(c) for c in n * xv)
        origin = (0,) * d
        rep_seeds = root.spawn(1)[0].generate_state(samples, dtype=np.uint64)

        def one(rep_seed) -> float:
            field = sample_weights(dist, box, int(rep_seed))
            return restricted_passage_time(field, origin, target) / n

        vals = np.array(_map_ordered(one, rep_seeds, threads))
        means.append(float(vals.mean()))
        sd = float(vals.std(ddof=1)) if samples > 1 else 0.0
        halfs.append(_Z95 * sd / math.sqrt(samples))
    ok = all(
        means[i + 1] <= means[i] + 2.0 * (halfs[i] + halfs[i + 1])
        for i in range(len(ns) - 1)
    )
    bracket = (float(dist.support_infimum) * l1, float(dist.mean()) * l1)
    return TimeConstantEstimate(
        x=tuple(int(c) for c in xv), ns=tuple(ns), means=tuple(means),
        half_widths=tuple(halfs), mu_hat=means[-1],
        ci=(means[-1] - halfs[-1], means[-1] + halfs[-1]),
        bracket=bracket, non_increasing_within_ci=ok)


# ---------------------------------------------------------------------------
# surface extension
# ---------------------------------------------------------------------------


@dataclass
class SurfaceCell:
    direction: tuple[int, ...]   # primitive nonnegative direction
    zeta: float                  # speed normalized to the primitive direction
    value: float
    ci: tuple[float, float]
    method: str
    sources: list
    modified: list


@dataclass
class RateSurface:
    """Extended rate table: cells on primitive nonnegative rays.

    Values are stored per primitive direction with speeds and rates divided by
    the integer ray scale, so absolute homogeneity is built into the storage;
    queries rescale.  The extension transforms only ever lower values (each
    uses a valid upper bound from elsewhere in the table), and every change is
    recorded on the cell.
    """

    cells: list[SurfaceCell]

    def directions(self) -> list[tuple[int, ...]]:
        seen = []
        for c in self.cells:
            if c.direction not in seen:
                seen.append(c.direction)
        return seen

    def ray(self, direction) -> list[SurfaceCell]:
        key = tuple(int(v) for v in direction)
        out = [c for c in self.cells if c.direction == key]
        return sorted(out, key=lambda c: c.zeta)

    def value_at(self, x, zeta: float):
        """(value, flag) with the structural rescaling applied.

        Above the tabulated speed range the last (smallest) value is returned,
        flagged, as a still-valid upper bound; below the range there is no
        valid bound and the flag says so with value None.
        """
        xv = _canonical_direction(x)
        k = math.gcd(*[int(v) for v in xv]) if xv.shape[0] > 1 else int(xv[0])
        p = tuple(int(v) for v in xv // k)
        ray = self.ray(p)
        if not ray:
            raise KeyError(f"no tabulated ray for direction {p}")
        zn = float(zeta) / k
        zs = [c.zeta for c in ray]
        vs = [c.value for c in ray]
        if zn < zs[0]:
            return None, "below tabulated speeds: no valid bound"
        if zn >= zs[-1]:
            flag = None if zn == zs[-1] else "above tabulated speeds: boundary value"
            return vs[-1] * k, flag
        j = int(np.searchsorted(zs, zn, side="right")) - 1
        t = (zn - zs[j]) / (zs[j + 1] - zs[j])
        return ((1.0 - t) * vs[j] + t * vs[j + 1]) * k, None

    def check_invariants(self):
        """Exact structural assertions on the stored table."""
        for c in self.cells:
            if any(v < 0 for v in c.direction) or math.gcd(*c.direction) != 1:
                raise AssertionError("direction not primitive nonnegative")
            if c.value < 0:
                raise AssertionError("negative rate value")
        for p in self.directions():
            ray = self.ray(p)
            vs = [c.value for c in ray]
            zs = [c.zeta for c in ray]
            for i in range(len(vs) - 1):
                if vs[i + 1] > vs[i]:
                    raise AssertionError(f"ray {p}: values increase in zeta")
            for i in range(1, len(vs) - 1):
                lhs = (vs[i] - vs[i - 1]) * (zs[i + 1] - zs[i])
                rhs = (vs[i + 1] - vs[i]) * (zs[i] - zs[i - 1])
                if lhs > rhs + 1e-12 * (1.0 + abs(rhs)):
                    raise AssertionError(f"ray {p}: convexity violated at {zs[i]}")
        return True

    def to_json(self) -> dict:
        return {
            "directions": [list(p) for p in self.directions()],
            "cells": [
                {
                    "direction": list(c.direction),
                    "zeta": c.zeta,
                    "value": c.value,
                    "ci": [c.ci[0], None if math.isinf(c.ci[1]) else c.ci[1]],
                    "method": c.method,
                    "modified": list(c.modified),
                    "sources": c.sources,
                }
                for c in self.cells
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "RateSurface":
        cells = [
            SurfaceCell(
                direction=tuple(int(v) for v in rec["direction"]),
                zeta=float(rec["zeta"]),
                value=float(rec["value"]),
                ci=(float(rec["ci"][0]),
                    math.inf if rec["ci"][1] is None else float(rec["ci"][1])),
                method=rec["method"],
                sources=list(rec.get("sources", [])),
                modified=list(rec.get("modified", [])),
            )
            for rec in data["cells"]
        ]
        return cls(cells=cells)

    def write_csv(self, path):
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["direction", "zeta", "value", "ci_lo", "ci_hi",
                        "method", "modified", "sources"])
            for c in self.cells:
                w.writerow([
                    "_".join(str(v) for v in c.direction),
                    repr(c.zeta), repr(c.value), repr(c.ci[0]),
                    "inf" if math.isinf(c.ci[1]) else repr(c.ci[1]),
                    c.method, ";".join(c.modified) or "none",
                    ";".join(str(s) for s in c.sources),
                ])


def extend_surface(points: Sequence[RatePoint]) -> RateSurface:
    """Build a structurally extended surface from raw rate points.

    Transforms applied in order: reflection to nonnegative directions,
    homogenization onto primitive rays, componentwise domination envelope
    (a cell inherits any smaller value at a componentwise-larger direction
    and smaller speed), and the lower convex envelope in the speed along each
    ray.  Duplicate cells with disjoint intervals raise
    :class:`SurfaceConflictError`.
    """
    if not points:
        raise ValueError("no points to extend")
    merged: dict[tuple, SurfaceCell] = {}
    conflicts = []
    for pt in points:
        xv = _canonical_direction(pt.x)
        k = math.gcd(*[int(v) for v in xv]) if xv.shape[0] > 1 else int(xv[0])
        p = tuple(int(v) for v in xv // k)
        zn = pt.zeta / k
        vn = pt.estimate / k
        cin = (pt.ci[0] / k, pt.ci[1] / k)
        source = {"x": list(pt.x), "zeta": pt.zeta, "n": pt.n, "method": pt.method}
        key = (p, round(zn, 12))
        if key in merged:
            cell = merged[key]
            lo1, hi1 = cell.ci
            lo2, hi2 = cin
            if hi1 < lo2 - 1e-12 or hi2 < lo1 - 1e-12:
                conflicts.append({"cell": key, "ci_a": cell.ci, "ci_b": cin})
                continue
            cell.sources.append(source)
            if vn < cell.value:
                cell.value = vn
                cell.ci = cin
                cell.method = pt.method
            continue
        merged[key] = SurfaceCell(direction=p, zeta=float(zn), value=float(vn),
                                  ci=cin, method=pt.method, sources=[source],
                                  modified=[])
    if conflicts:
        raise SurfaceConflictError(conflicts)
    cells = list(merged.values())

    # componentwise domination: larger direction at smaller speed bounds us
    for c in cells:
        pc = np.array(c.direction)
        for o in cells:
            if o is c:
                continue
            po = np.array(o.direction)
            if np.all(po >= pc) and o.zeta <= c.zeta + 1e-15 and o.value < c.value:
                c.value = o.value
                c.ci = o.ci
                if "monotone-envelope" not in c.modified:
                    c.modified.append("monotone-envelope")

    # lower convex envelope in zeta along each ray
    surface = RateSurface(cells=cells)
    for p in surface.directions():
        ray = surface.ray(p)
        if len(ray) < 3:
            continue
        zs = np.array([c.zeta for c in ray])
        vs = np.array([c.value for c in ray])
        hull = [0]
        for i in range(1, len(ray)):
            while len(hull) >= 2:
                a, b = hull[-2], hull[-1]
                if (vs[b] - vs[a]) * (zs[i] - zs[b]) >= (vs[i] - vs[b]) * (zs[b] - zs[a]):
                    hull.pop()
                else:
                    break
            hull.append(i)
        for i, c in enumerate(ray):
            j = int(np.searchsorted(zs[hull], zs[i], side="right")) - 1
            j = min(max(j, 0), len(hull) - 2)
            a, b = hull[j], hull[j + 1]
            t = 0.0 if zs[b] == zs[a] else (zs[i] - zs[a]) / (zs[b] - zs[a])
            env = (1.0 - t) * vs[a] + t * vs[b]
            if env < c.value - 1e-15:
                c.value = float(env)
                c.modified.append("convex-envelope")
    return surface


def default_zeta_grid(dist, x, count: int = 6, delta: float = 0.05) -> np.ndarray:
    """Geometric speed grid between just above the trivial threshold and the
    mean-speed ceiling."""
    xv = _canonical_direction(x)
    l1 = int(np.abs(xv).sum())
    lo = float(dist.support_infimum) * l1 * (1.0 + delta)
    hi = float(dist.mean()) * l1
    if lo <= 0:
        lo = min(1e-3, hi * 0.1)
    if hi <= lo:
        hi = lo * 2.0
    return np.geomspace(lo, hi, count)


# ---------------------------------------------------------------------------
# zero-set structure
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ZeroSetReport:
    direction: tuple[int, ...]
    mu_hat: float
    mu_ci: tuple[float, float]
    zero_ok: bool
    positive_ok: bool
    trend_ok: bool
    trend_slope: float
    details: dict

    def passed(self) -> bool:
        return self.zero_ok and self.positive_ok and self.trend_ok


def zero_set_check(surface: RateSurface, tc: TimeConstantEstimate,
                   zero_tol: float = 0.05, margin: float | None = None) -> ZeroSetReport:
    """Compare the surface's zero set with the estimated time constant.

    Cells at speeds two CIs above the time constant must carry (near) zero
    rate; cells below it by ``margin`` must be positive beyond their own CI;
    and a linear fit over the positive range must slope downward.
    """
    xv = _canonical_direction(tc.x)
    k = math.gcd(*[int(v) for v in xv]) if xv.shape[0] > 1 else int(xv[0])
    p = tuple(int(v) for v in xv // k)
    ray = surface.ray(p)
    if not ray:
        raise ValueError(f"surface has no ray for direction {p}")
    mu_n = tc.mu_hat / k
    half_n = (tc.ci[1] - tc.ci[0]) / 2.0 / k
    if margin is None:
        margin = max(2.0 * half_n, 0.05 * mu_n)

    zero_cells = [c for c in ray if c.zeta >= mu_n + 2.0 * half_n]
    pos_cells = [c for c in ray if c.zeta <= mu_n - margin]
    if not zero_cells and not pos_cells:
        raise ValueError("surface ray does not straddle the time constant")
    zero_ok = all(c.value <= zero_tol for c in zero_cells)
    positive_ok = all(c.ci[0] > 0.0 for c in pos_cells) and bool(pos_cells)

    trend_cells = [c for c in ray if c.zeta <= mu_n]
    if len(trend_cells) >= 2:
        zs = np.array([c.zeta for c in trend_cells])
        vs = np.array([c.value for c in trend_cells])
        slope = float(np.polyfit(zs, vs, 1)[0])
        trend_ok = slope < 0.0
    else:
        slope = math.nan
        trend_ok = True
    return ZeroSetReport(
        direction=p, mu_hat=tc.mu_hat, mu_ci=tc.ci, zero_ok=zero_ok,
        positive_ok=positive_ok, trend_ok=trend_ok, trend_slope=slope,
        details={
            "normalized_mu": mu_n,
            "n_zero_cells": len(zero_cells),
            "n_positive_cells": len(pos_cells),
            "zero_values": [c.value for c in zero_cells],
            "positive_ci_lows": [c.ci[0] for c in pos_cells],
        })
