"""Continuum geometry: Lipschitz paths, highway metrics, and length/derivative
tools on the unit cube.

The central objects are piecewise-linear paths with canonical arc-length
parametrization, pseudometrics of "weighted l1 norm plus discounted highways"
type, and the recursive insertion of highways into a base norm.  Everything
operating on incidence (intersection, cutting, injectivity) uses exact
rational arithmetic via :mod:`fpplab._segments`; floats are binary rationals,
so these decisions carry no rounding error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.sparse.csgraph import dijkstra as _csgraph_dijkstra
from scipy.sparse.csgraph import floyd_warshall as _floyd_warshall

from ._segments import (
    complement_segments,
    fvec,
    flerp,
    point_on_segment,
    segment_intersection,
    _parallel,
)


class GeometryError(ValueError):
    """Invalid geometric input (non-injective path, overlapping highways, ...)."""


def _complete_csr(E: np.ndarray):
    """Complete-graph CSR with every off-diagonal entry stored explicitly.

    csgraph's dense-input conversion drops edges whose weight is zero or merely
    tiny, which would disconnect geometrically coincident nodes; explicitly
    stored entries of a sparse matrix are kept whatever their value.
    """
    from scipy.sparse import csr_matrix

    n = E.shape[0]
    cols = np.broadcast_to(np.arange(n), (n, n))
    mask = ~np.eye(n, dtype=bool)
    indices = cols[mask]
    data = E[mask]
    indptr = np.arange(n + 1) * (n - 1)
    return csr_matrix((data, indices, indptr), shape=(n, n))


class GeodesyError(GeometryError):
    """A curve offered as a geodesic fails the geodesic identity."""


class RefinementError(RuntimeError):
    """Dyadic refinement failed to converge at the requested tolerance."""

    def __init__(self, message: str, last: float, previous: float):
        super().__init__(message)
        self.last = last
        self.previous = previous


# ---------------------------------------------------------------------------
# paths
# ---------------------------------------------------------------------------


class LipschitzPath:
    """Piecewise-linear path in [0, 1]^d with unit-speed l1 parametrization.

    The path is stored as its breakpoint polyline.  The canonical parameter
    of a point is the cumulative l1 length from the start, so ``point_at(t)``
    moves at l1 speed one and the parameter domain is ``[0, length_l1]``.
    Consecutive duplicate breakpoints are dropped at construction.
    """

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] < 1:
            raise GeometryError("path needs at least two points of dimension >= 1")
        if not np.all(np.isfinite(pts)):
            raise GeometryError("path breakpoints must be finite")
        keep = [0]
        for i in range(1, pts.shape[0]):
            if not np.array_equal(pts[i], pts[keep[-1]]):
                keep.append(i)
        pts = pts[keep]
        if pts.shape[0] < 2:
            raise GeometryError("path is a single point after removing duplicates")
        self.points = pts
        self.dim = pts.shape[1]
        steps = np.abs(np.diff(pts, axis=0)).sum(axis=1)
        self.cum = np.concatenate([[0.0], np.cumsum(steps)])
        self._frac_cache = None

    # -- exact views --------------------------------------------------------

    @property
    def _frac(self):
        """(points as Fraction tuples, exact cumulative l1 params)."""
        if self._frac_cache is None:
            fpts = [fvec(p) for p in self.points]
            cum = [Fraction(0)]
            for a, b in zip(fpts[:-1], fpts[1:]):
                cum.append(cum[-1] + sum(abs(x - y) for x, y in zip(a, b)))
            self._frac_cache = (fpts, cum)
        return self._frac_cache

    # -- basic measurements --------------------------------------------------

    @property
    def length_l1(self) -> float:
        return float(self.cum[-1])

    @property
    def length_euclid(self) -> float:
        return float(np.linalg.norm(np.diff(self.points, axis=0), axis=1).sum())

    @property
    def n_pieces(self) -> int:
        return self.points.shape[0] - 1

    def pieces(self):
        """Yield (p0, p1, t0, t1) for each linear piece, t the canonical param."""
        for i in range(self.n_pieces):
            yield self.points[i], self.points[i + 1], float(self.cum[i]), float(self.cum[i + 1])

    def point_at(self, t):
        """Point at canonical parameter t (scalar or array)."""
        t = np.asarray(t, dtype=float)
        t = np.clip(t, 0.0, self.cum[-1])
        out = np.empty(t.shape + (self.dim,))
        for a in range(self.dim):
            out[..., a] = np.interp(t, self.cum, self.points[:, a])
        return out

    def point_at_frac(self, t: Fraction):
        """Exact point at an exact canonical parameter."""
        fpts, cum = self._frac
        if t <= cum[0]:
            return fpts[0]
        if t >= cum[-1]:
            return fpts[-1]
        for i in range(len(cum) - 1):
            if cum[i] <= t <= cum[i + 1]:
                s = (t - cum[i]) / (cum[i + 1] - cum[i])
                return flerp(fpts[i], fpts[i + 1], s)
        raise AssertionError("unreachable")

    def subpath(self, a: Fraction, b: Fraction) -> "LipschitzPath":
        """Restriction to exact canonical parameters a <= b."""
        if b <= a:
            raise GeometryError("empty subpath")
        fpts, cum = self._frac
        pts = [self.point_at_frac(a)]
        for p, c in zip(fpts, cum):
            if a < c < b:
                pts.append(p)
        pts.append(self.point_at_frac(b))
        return LipschitzPath(np.array([[float(c) for c in p] for p in pts]))

    def direction(self, piece: int) -> np.ndarray:
        """l1-unit direction vector of a piece."""
        d = self.points[piece + 1] - self.points[piece]
        return d / np.abs(d).sum()

    # -- incidence -----------------------------------------------------------

    def first_self_intersection(self):
        """Earliest pair of distinct canonical params hitting one point.

        Returns (t_early, t_late) as exact Fractions, or None if the path is
        injective.  A positive-length self-overlap raises, since splicing it
        out is not well defined.
        """
        fpts, cum = self._frac
        n = len(fpts) - 1
        hits = []
        for i in range(n):
            for j in range(i + 1, n):
                res = segment_intersection(fpts[i], fpts[i + 1], fpts[j], fpts[j + 1])
                if res is None:
                    continue
                if res[0] == "overlap":
                    (t0, t1), (u0, u1) = res[1], res[2]
                    if j == i + 1:
                        # adjacent pieces legitimately share the joint
                        if t1 - t0 == 0 and t0 == 1 and min(u0, u1) == 0:
                            continue
                        raise GeometryError("path backtracks along itself")
                    raise GeometryError("path has a positive-length self-overlap")
                t, u = res[1], res[2]
                if j == i + 1 and t == 1 and u == 0:
                    continue
                ga = cum[i] + t * (cum[i + 1] - cum[i])
                gb = cum[j] + u * (cum[j + 1] - cum[j])
                if ga != gb:
                    hits.append((min(ga, gb), max(ga, gb)))
        if not hits:
            return None
        return min(hits)

    def is_injective(self) -> bool:
        return self.first_self_intersection() is None

    def __repr__(self):
        return f"LipschitzPath({self.n_pieces} pieces, l1 length {self.length_l1:g})"


def remove_loops(path: LipschitzPath, max_rounds: int = 128) -> LipschitzPath:
    """Splice out self-intersections until the path is injective."""
    for _ in range(max_rounds):
        hit = path.first_self_intersection()
        if hit is None:
            return path
        a, b = hit
        total = path._frac[1][-1]
        pts = []
        if a > 0:
            pts.extend(path.subpath(Fraction(0), a).points)
        else:
            pts.append(path.points[0])
        if b < total:
            tail = path.subpath(b, total).points
            pts.extend(tail if len(pts) == 0 else tail[1:] if np.array_equal(pts[-1], tail[0]) else tail)
        arr = np.asarray(pts, dtype=float)
        if arr.shape[0] < 2:
            raise GeometryError("loop removal collapsed the path to a point")
        path = LipschitzPath(arr)
    raise GeometryError("loop removal did not terminate")


def cut_path_against(path: LipschitzPath, obstacles: Sequence[LipschitzPath]) -> list[LipschitzPath]:
    """Maximal closed subpaths of ``path`` meeting the obstacles in a set of
    l1-length zero.

    Positive-length overlaps with an obstacle are removed outright; an
    isolated crossing splits the path, and both resulting closed subpaths keep
    the crossing point as an endpoint.  Returns possibly zero subpaths, each
    of positive length, in order along the original path.
    """
    fpts, cum = path._frac
    removed: list[tuple[Fraction, Fraction]] = []
    for obs in obstacles:
        opts, _ = obs._frac
        for i in range(len(fpts) - 1):
            for j in range(len(opts) - 1):
                res = segment_intersection(fpts[i], fpts[i + 1], opts[j], opts[j + 1])
                if res is None:
                    continue
                if res[0] == "point":
                    t = res[1]
                    g = cum[i] + t * (cum[i + 1] - cum[i])
                    removed.append((g, g))
                else:
                    t0, t1 = res[1]
                    g0 = cum[i] + t0 * (cum[i + 1] - cum[i])
                    g1 = cum[i] + t1 * (cum[i + 1] - cum[i])
                    removed.append((g0, g1))
    keep = complement_segments((Fraction(0), cum[-1]), removed)
    return [path.subpath(a, b) for a, b in keep]


def paths_pairwise_disjoint(paths: Sequence[LipschitzPath], allow_touch: bool = True):
    """Check pairwise disjointness of a path family.

    With ``allow_touch`` the check tolerates finitely many isolated common
    points (which have l1-length zero) and only rejects positive-length
    overlaps.  Returns (ok, n_touch_points).
    """
    touches = set()
    for a in range(len(paths)):
        fa, _ = paths[a]._frac
        for b in range(a + 1, len(paths)):
            fb, _ = paths[b]._frac
            for i in range(len(fa) - 1):
                for j in range(len(fb) - 1):
                    res = segment_intersection(fa[i], fa[i + 1], fb[j], fb[j + 1])
                    if res is None:
                        continue
                    if res[0] == "overlap":
                        return False, len(touches)
                    if not allow_touch:
                        return False, len(touches)
                    t = res[1]
                    touches.add(flerp(fa[i], fa[i + 1], t))
    return True, len(touches)


# ---------------------------------------------------------------------------
# weighted l1 norm plus discounted highways
# ---------------------------------------------------------------------------


def _norm_factory(weights: np.ndarray) -> Callable:
    w = np.asarray(weights, dtype=float)

    def g(v):
        return np.abs(np.asarray(v, dtype=float)) @ w

    return g


@dataclass
class _Highway:
    """Internal record: one highway with its discount profile tabulated on the
    merged breakpoint grid (geometry breakpoints plus profile breakpoints)."""

    path: LipschitzPath
    profile: tuple[tuple[float, float], ...]  # (param_end, lam) pieces
    ts: np.ndarray = field(init=False)        # merged params
    pts: np.ndarray = field(init=False)       # points at ts
    cumd: np.ndarray = field(init=False)      # discounted g-length at ts
    cumg: np.ndarray = field(init=False)      # plain g-length at ts

    def tabulate(self, gnorm: Callable):
        total = self.path.length_l1
        ts = set(float(c) for c in self.path.cum)
        ts.update(min(float(end), total) for end, _ in self.profile)
        self.ts = np.array(sorted(ts))
        self.pts = self.path.point_at(self.ts)
        ends = np.array([end for end, _ in self.profile])
        lams = np.array([lam for _, lam in self.profile])
        cumd = [0.0]
        cumg = [0.0]
        for a, b in zip(self.ts[:-1], self.ts[1:]):
            seg_g = gnorm(self.path.point_at(b) - self.path.point_at(a))
            lam = lams[np.searchsorted(ends, 0.5 * (a + b))]
            cumd.append(cumd[-1] + lam * seg_g)
            cumg.append(cumg[-1] + seg_g)
        self.cumd = np.array(cumd)
        self.cumg = np.array(cumg)

    def lam_at(self, t: float) -> float:
        ends = [end for end, _ in self.profile]
        k = int(np.searchsorted(ends, t))
        k = min(k, len(self.profile) - 1)
        return self.profile[k][1]

    def cumd_at(self, t) -> np.ndarray:
        return np.interp(np.asarray(t, dtype=float), self.ts, self.cumd)

    def projections(self, x: np.ndarray):
        """Axis-aligned foot points of x on the highway interior.

        For each linear piece and each coordinate axis moving on that piece,
        the parameter where the highway matches x in that coordinate.  These
        are exactly the interior candidates at which the map
        t -> g(x - sigma(t)) can kink, so minimizing over them plus the
        breakpoints is exact.
        """
        params = []
        for i in range(len(self.ts) - 1):
            p0, p1 = self.pts[i], self.pts[i + 1]
            t0, t1 = self.ts[i], self.ts[i + 1]
            delta = p1 - p0
            for a in np.nonzero(delta)[0]:
                frac = (x[a] - p0[a]) / delta[a]
                if 0.0 < frac < 1.0:
                    params.append(t0 + frac * (t1 - t0))
        return np.array(params)


def _normalize_profile(speed, total: float):
    if np.isscalar(speed):
        profile = ((float(total), float(speed)),)
    else:
        profile = tuple((float(end), float(lam)) for end, lam in speed)
        ends = [end for end, _ in profile]
        if list(ends) != sorted(ends) or abs(ends[-1] - total) > 1e-9 * max(1.0, total):
            raise GeometryError("speed profile must cover the path in increasing pieces")
    for _, lam in profile:
        if not (0.0 < lam <= 1.0):
            raise GeometryError(f"discount factor {lam} outside (0, 1]")
    return profile


class NormPlusHighways:
    """Pseudometric: weighted l1 norm, discounted along a disjoint highway family.

    ``weights`` are the positive per-axis norm weights, each highway is an
    injective Lipschitz path together with a discount in (0, 1] (a constant or
    a piecewise-constant profile given as (param_end, lam) pieces).  Distances
    are computed on a candidate graph whose nodes are highway access points:
    uniform grids plus all breakpoints, with the query points' axis
    projections added per query.  Single-highway routes are exact because the
    access objective is piecewise linear between candidates; multi-highway
    routes go through an all-pairs table on the access pool and converge under
    access refinement.
    """

    def __init__(self, weights, highways, access_points: int = 17, validate: bool = True):
        self.weights = np.asarray(weights, dtype=float)
        if self.weights.ndim != 1 or np.any(self.weights <= 0) or not np.all(np.isfinite(self.weights)):
            raise GeometryError("norm weights must be positive and finite")
        self.dim = self.weights.shape[0]
        self.gnorm = _norm_factory(self.weights)
        self.access_points = int(access_points)
        if self.access_points < 2:
            raise GeometryError("need at least two access points per highway")

        self.highways: list[_Highway] = []
        for path, speed in highways:
            if not isinstance(path, LipschitzPath):
                path = LipschitzPath(path)
            if path.dim != self.dim:
                raise GeometryError("highway dimension does not match the norm")
            hw = _Highway(path, _normalize_profile(speed, path.length_l1))
            hw.tabulate(self.gnorm)
            self.highways.append(hw)

        if validate:
            self._validate()
        self._build_pool()

    # -- validation ----------------------------------------------------------

    def _validate(self):
        for k, hw in enumerate(self.highways):
            if not hw.path.is_injective():
                raise GeometryError(f"highway {k} is not injective")
        ok, _ = paths_pairwise_disjoint([hw.path for hw in self.highways], allow_touch=False)
        if not ok:
            raise GeometryError("highways must be pairwise disjoint")
        for k, hw in enumerate(self.highways):
            # necessary geodesy condition, checked exactly on breakpoint pairs:
            # riding between any two tabulated points must not lose to the
            # straight norm path
            m = len(hw.ts)
            for i in range(m):
                for j in range(i + 1, m):
                    ride = hw.cumd[j] - hw.cumd[i]
                    chord = self.gnorm(hw.pts[j] - hw.pts[i])
                    if ride > chord + 1e-12 * max(1.0, chord):
                        raise GeodesyError(
                            f"highway {k} is not a geodesic: riding {ride:.12g} "
                            f"exceeds the direct norm cost {chord:.12g}"
                        )

    def validate_geodesics(self, samples: int = 9, tol: float = 1e-9):
        """Full check that each highway realizes the metric between its points."""
        for k, hw in enumerate(self.highways):
            ts = np.linspace(0.0, hw.path.length_l1, samples)
            for i in range(samples):
                for j in range(i + 1, samples):
                    ride = abs(float(hw.cumd_at(ts[j]) - hw.cumd_at(ts[i])))
                    val = self.evaluate(hw.path.point_at(ts[i]), hw.path.point_at(ts[j]))
                    if abs(val - ride) > tol * (1.0 + ride):
                        raise GeodesyError(
                            f"highway {k} fails the geodesic identity at "
                            f"params ({ts[i]:.6g}, {ts[j]:.6g}): metric {val:.12g} "
                            f"vs ride {ride:.12g}"
                        )

    # -- access pool ----------------------------------------------------------

    def _build_pool(self):
        node_pts = []
        node_cum = []
        self._slices = []
        self._node_params = []
        start = 0
        for hw in self.highways:
            total = hw.path.length_l1
            params = np.unique(np.concatenate([hw.ts, np.linspace(0.0, total, self.access_points)]))
            pts = hw.path.point_at(params)
            cum = hw.cumd_at(params)
            node_pts.append(pts)
            node_cum.append(cum)
            self._node_params.append(params)
            self._slices.append(slice(start, start + len(params)))
            start += len(params)
        if node_pts:
            self._H = np.concatenate(node_pts, axis=0)
            self._Hcum = np.concatenate(node_cum)
            diff = np.abs(self._H[:, None, :] - self._H[None, :, :])
            W = diff @ self.weights
            for sl in self._slices:
                cum = self._Hcum[sl]
                ride = np.abs(cum[:, None] - cum[None, :])
                W[sl, sl] = np.minimum(W[sl, sl], ride)
            self._W = _floyd_warshall(_complete_csr(W), directed=False)
        else:
            self._H = np.zeros((0, self.dim))
            self._Hcum = np.zeros(0)
            self._W = np.zeros((0, 0))

    def refined(self) -> "NormPlusHighways":
        """Same metric with the access grid spacing halved (grids nest)."""
        out = NormPlusHighways.__new__(NormPlusHighways)
        out.weights = self.weights
        out.dim = self.dim
        out.gnorm = self.gnorm
        out.access_points = 2 * self.access_points - 1
        out.highways = self.highways
        out._build_pool()
        return out

    # -- evaluation ------------------------------------------------------------

    def _entry_candidates(self, hw: _Highway, params_extra: np.ndarray, x: np.ndarray):
        params = np.unique(np.concatenate([params_extra, hw.projections(x)]))
        pts = hw.path.point_at(params)
        cum = hw.cumd_at(params)
        cost = np.abs(x[None, :] - pts) @ self.weights
        return cost, cum

    def evaluate(self, x, y) -> float:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.shape != (self.dim,) or y.shape != (self.dim,):
            raise GeometryError("points must match the metric dimension")
        best = float(self.gnorm(x - y))
        if not self.highways:
            return best
        vx = np.abs(x[None, :] - self._H) @ self.weights
        vy = np.abs(y[None, :] - self._H) @ self.weights
        for k, hw in enumerate(self.highways):
            params = self._node_params[k]
            cx, cumx = self._entry_candidates(hw, params, x)
            cy, cumy = self._entry_candidates(hw, params, y)
            ride = np.abs(cumx[:, None] - cumy[None, :])
            best = min(best, float(np.min(cx[:, None] + ride + cy[None, :])))
            sl = self._slices[k]
            node_cum = self._Hcum[sl]
            vx[sl] = np.minimum(vx[sl], np.min(cx[:, None] + np.abs(cumx[:, None] - node_cum[None, :]), axis=0))
            vy[sl] = np.minimum(vy[sl], np.min(cy[:, None] + np.abs(cumy[:, None] - node_cum[None, :]), axis=0))
        best = min(best, float(np.min(vx[:, None] + self._W + vy[None, :])))
        return best

    def __call__(self, x, y) -> float:
        return self.evaluate(x, y)

    # -- geodesics ---------------------------------------------------------------

    def geodesic(self, x, y):
        """A distance-realizing polyline from x to y.

        Built on the candidate graph: query points, pool nodes, and the query
        points' axis projections, with straight norm hops between all pairs
        and discounted hops between parameter-consecutive points of the same
        highway.  Any graph edge is geometrically a straight segment, so the
        returned polyline is just the visited point sequence.  Returns
        (path, value).
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        pts = [x, y]
        hw_params: list[list[tuple[float, int]]] = []
        for k, hw in enumerate(self.highways):
            params = np.unique(np.concatenate([
                self._node_params[k], hw.projections(x), hw.projections(y)]))
            entries = []
            for t in params:
                entries.append((float(t), len(pts)))
                pts.append(hw.path.point_at(t))
            hw_params.append(entries)
        P = np.asarray(pts)
        n = P.shape[0]
        E = np.abs(P[:, None, :] - P[None, :, :]) @ self.weights
        for k, hw in enumerate(self.highways):
            entries = hw_params[k]
            for (t0, i0), (t1, i1) in zip(entries[:-1], entries[1:]):
                ride = float(hw.cumd_at(t1) - hw.cumd_at(t0))
                if ride < E[i0, i1]:
                    E[i0, i1] = ride
                    E[i1, i0] = ride
        dist, pred = _csgraph_dijkstra(_complete_csr(E), directed=False,
                                       indices=0, return_predecessors=True)
        order = [1]
        while order[-1] != 0:
            p = int(pred[order[-1]])
            if p < 0:
                raise GeometryError("no route between the query points")
            order.append(p)
        order.reverse()
        poly = P[order]
        return LipschitzPath(poly), float(dist[1])

    def to_json(self) -> dict:
        return {
            "kind": "norm_plus_highways",
            "weights": [float(w) for w in self.weights],
            "access_points": self.access_points,
            "highways": [
                {
                    "points": [[float(c) for c in p] for p in hw.path.points],
                    "profile": [[float(e), float(l)] for e, l in hw.profile],
                }
                for hw in self.highways
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "NormPlusHighways":
        highways = [
            (LipschitzPath(np.asarray(h["points"], dtype=float)),
             [(e, l) for e, l in h["profile"]])
            for h in data["highways"]
        ]
        return cls(data["weights"], highways, access_points=data.get("access_points", 17))


# ---------------------------------------------------------------------------
# tabulated pseudometrics
# ---------------------------------------------------------------------------


class GridPseudometric:
    """Pseudometric tabulated on the regular (m+1)^d grid of the unit cube.

    Interpolation contract: at pairs of grid nodes the stored value is
    returned exactly; elsewhere the value is the multilinear interpolation in
    each argument separately.  Interpolated values are convex combinations of
    node values, so bounds transfer, but the pseudometric axioms are only
    guaranteed at the nodes.
    """

    def __init__(self, values: np.ndarray, m: int, dim: int):
        values = np.asarray(values, dtype=float)
        n_nodes = (m + 1) ** dim
        if values.shape != (n_nodes, n_nodes):
            raise GeometryError(f"need a {n_nodes} x {n_nodes} table for m={m}, d={dim}")
        self.values = values
        self.m = int(m)
        self.dim = int(dim)

    @classmethod
    def from_function(cls, fn: Callable, m: int, dim: int) -> "GridPseudometric":
        coords = np.stack(np.meshgrid(*([np.arange(m + 1)] * dim), indexing="ij"), axis=-1)
        nodes = coords.reshape(-1, dim) / m
        n = nodes.shape[0]
        vals = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                vals[i, j] = vals[j, i] = fn(nodes[i], nodes[j])
        return cls(vals, m, dim)

    @classmethod
    def from_rescaled(cls, rescaled) -> "GridPseudometric":
        """Adapter for a box metric already tabulated on all lattice sites."""
        box = rescaled.field.box
        return cls(rescaled.matrix, box.side, box.dimension)

    def _corners(self, z: np.ndarray):
        zm = np.clip(np.asarray(z, dtype=float), 0.0, 1.0) * self.m
        base = np.minimum(zm.astype(int), self.m - 1)
        frac = zm - base
        idx = []
        wts = []
        for corner in range(1 << self.dim):
            w = 1.0
            flat = 0
            for a in range(self.dim):
                bit = (corner >> a) & 1
                w *= frac[a] if bit else (1.0 - frac[a])
                flat = flat * (self.m + 1) + (base[a] + bit)
            if w > 0.0:
                idx.append(flat)
                wts.append(w)
        return np.array(idx), np.array(wts)

    def evaluate(self, x, y) -> float:
        ix, wx = self._corners(x)
        iy, wy = self._corners(y)
        block = self.values[np.ix_(ix, iy)]
        return float(wx @ block @ wy)

    def __call__(self, x, y) -> float:
        return self.evaluate(x, y)


def _as_eval(metric) -> Callable:
    if callable(metric):
        return metric
    if hasattr(metric, "evaluate"):
        return metric.evaluate
    raise TypeError("metric must be callable or expose .evaluate(x, y)")


# ---------------------------------------------------------------------------
# recursive highway insertion
# ---------------------------------------------------------------------------


class HWChain:
    """State of the highway insertion recursion, flattened onto a node pool.

    The metric after K insertions is represented by access nodes on the
    inserted highways and the min-plus closed matrix M of their pairwise
    values; a query routes straight from x into the pool, through M, and
    straight out.  M only ever decreases under insertion, and it stays at or
    above the insertion target as long as each inserted curve is a target
    geodesic, since every graph edge then dominates the target distance.
    """

    def __init__(self, weights, nodes=None, M=None, paths=()):
        self.weights = np.asarray(weights, dtype=float)
        self.gnorm = _norm_factory(self.weights)
        self.dim = self.weights.shape[0]
        self.nodes = np.zeros((0, self.dim)) if nodes is None else nodes
        self.M = np.zeros((0, 0)) if M is None else M
        self.paths = tuple(paths)

    @classmethod
    def base(cls, weights) -> "HWChain":
        return cls(weights)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    def query(self, x, y) -> float:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        best = float(self.gnorm(x - y))
        if self.n_nodes:
            gx = np.abs(x[None, :] - self.nodes) @ self.weights
            gy = np.abs(y[None, :] - self.nodes) @ self.weights
            best = min(best, float(np.min(gx[:, None] + self.M + gy[None, :])))
        return best

    def __call__(self, x, y) -> float:
        return self.query(x, y)

    def insert(self, path: LipschitzPath, access_params: np.ndarray, cum: np.ndarray) -> "HWChain":
        """Insert one highway given its access parameters and the cumulative
        target distance along them; returns the next chain state."""
        new_pts = path.point_at(access_params)
        ride = np.abs(cum[:, None] - cum[None, :])
        all_pts = np.concatenate([self.nodes, new_pts], axis=0)
        E = np.abs(all_pts[:, None, :] - all_pts[None, :, :]) @ self.weights
        n_old = self.n_nodes
        if n_old:
            E[:n_old, :n_old] = np.minimum(E[:n_old, :n_old], self.M)
        E[n_old:, n_old:] = np.minimum(E[n_old:, n_old:], ride)
        M = _floyd_warshall(_complete_csr(E), directed=False)
        return HWChain(self.weights, all_pts, M, self.paths + (path,))


def hw_insert(
    chain: HWChain,
    path: LipschitzPath,
    target,
    probe_pairs=None,
    tol: float = 1e-9,
    geodesy_tol: float = 1e-9,
    initial_access: int = 17,
    max_doublings: int = 5,
) -> HWChain:
    """One step of the insertion recursion with automatic access refinement.

    ``target`` supplies the distances along the inserted curve; the curve must
    be a target geodesic, which is validated by comparing the accumulated
    increments with the direct target distance between the endpoints.  The
    access grid is doubled until the queried values at the probe pairs are
    Cauchy at tolerance ``tol``.
    """
    ev = _as_eval(target)
    total = path.length_l1
    direct = ev(path.points[0], path.points[-1])

    if probe_pairs is None:
        corners = [np.zeros(chain.dim), np.ones(chain.dim)]
        anchors = corners + [np.full(chain.dim, 0.5), path.points[0], path.points[-1]]
        probe_pairs = [(a, b) for i, a in enumerate(anchors) for b in anchors[i + 1:]]
    probe_points = [p for pair in probe_pairs for p in pair]

    base_params = set(float(c) for c in path.cum)
    for pt in probe_points:
        z = np.asarray(pt, dtype=float)
        for i in range(path.n_pieces):
            p0, p1 = path.points[i], path.points[i + 1]
            delta = p1 - p0
            for a in np.nonzero(delta)[0]:
                frac = (z[a] - p0[a]) / delta[a]
                if 0.0 < frac < 1.0:
                    base_params.add(float(path.cum[i] + frac * (path.cum[i + 1] - path.cum[i])))

    prev_vals = None
    prev_chain = None
    count = initial_access
    for _ in range(max_doublings + 1):
        params = np.unique(np.concatenate([
            np.array(sorted(base_params)), np.linspace(0.0, total, count)]))
        pts = path.point_at(params)
        incs = np.array([ev(pts[i], pts[i + 1]) for i in range(len(params) - 1)])
        cum = np.concatenate([[0.0], np.cumsum(incs)])
        if abs(cum[-1] - direct) > geodesy_tol * (1.0 + abs(direct)):
            raise GeodesyError(
                f"inserted curve is not a target geodesic: accumulated "
                f"{cum[-1]:.12g} vs direct {direct:.12g}"
            )
        nxt = chain.insert(path, params, cum)
        vals = np.array([nxt.query(a, b) for a, b in probe_pairs])
        if prev_vals is not None and np.max(np.abs(vals - prev_vals)) <= tol:
            return nxt
        prev_vals = vals
        prev_chain = nxt
        count = 2 * count - 1  # halve the grid spacing, keeping earlier points
    return prev_chain


# ---------------------------------------------------------------------------
# highway networks
# ---------------------------------------------------------------------------


@dataclass
class HighwayNetwork:
    """A family of injective, essentially disjoint geodesic pieces extracted
    from a metric, with the distance table along each piece."""

    weights: np.ndarray
    paths: list[LipschitzPath]
    cum_tables: list[tuple[np.ndarray, np.ndarray]]  # (params, cum target distance)
    diagnostics: list[dict]
    converged: bool
    chain: HWChain | None = None

    def validate(self) -> dict:
        for k, p in enumerate(self.paths):
            if not p.is_injective():
                raise GeometryError(f"network path {k} is not injective")
        ok, touches = paths_pairwise_disjoint(self.paths, allow_touch=True)
        if not ok:
            raise GeometryError("network paths overlap on positive length")
        return {"n_paths": len(self.paths), "n_touch_points": touches}

    def discount_profile(self, k: int):
        """Per linear piece of path k: (t0, t1, lam) with lam the ratio of
        target speed to norm speed."""
        path = self.paths[k]
        ts, cum = self.cum_tables[k]
        gnorm = _norm_factory(self.weights)
        out = []
        for i in range(len(ts) - 1):
            seg_g = gnorm(path.point_at(ts[i + 1]) - path.point_at(ts[i]))
            dd = cum[i + 1] - cum[i]
            lam = dd / seg_g if seg_g > 0 else 1.0
            out.append((float(ts[i]), float(ts[i + 1]), float(lam)))
        return out

    def to_json(self) -> dict:
        return {
            "weights": [float(w) for w in self.weights],
            "converged": bool(self.converged),
            "paths": [
                {
                    "points": [[float(c) for c in p] for p in path.points],
                    "params": [float(t) for t in ts],
                    "cum": [float(c) for c in cum],
                }
                for path, (ts, cum) in zip(self.paths, self.cum_tables)
            ],
            "diagnostics": self.diagnostics,
        }


def _default_probe_pairs(dim: int, extra: int = 3, seed: int = 0):
    from scipy.stats import qmc

    corners = [np.zeros(dim), np.ones(dim)]
    pts = corners + [np.full(dim, 0.5)]
    if extra > 0:
        sampler = qmc.Halton(d=dim, scramble=True, seed=seed)
        pts.extend(sampler.random(extra))
    return [(a, b) for i, a in enumerate(pts) for b in pts[i + 1:]]


def build_highway_network(
    metric,
    n_geodesics: int = 12,
    tol: float = 1e-6,
    probe_pairs=None,
    seed: int = 0,
    seed_pairs: Sequence[tuple] = (),
    initial_access: int = 17,
    min_length: float = 1e-9,
) -> HighwayNetwork:
    """Recover a highway network from a metric by repeated geodesic insertion.

    Geodesics between low-discrepancy endpoint pairs (with any designated
    ``seed_pairs`` processed first) are de-looped, cut against the network
    built so far, so that only new material of positive length is kept, and
    inserted.  After each geodesic the supremum distance between the
    reconstruction and the metric over the probe pairs is recorded; the
    sequence is nonincreasing because insertion only lowers the
    reconstruction, which stays at or above the metric.  The construction
    stops once the diagnostic reaches ``tol``; exhausting ``n_geodesics``
    first returns the partial network with ``converged`` False.
    """
    from scipy.stats import qmc

    ev = _as_eval(metric)
    if isinstance(metric, NormPlusHighways):
        weights = metric.weights
    else:
        raise TypeError("network construction needs a NormPlusHighways metric")
    dim = metric.dim
    if probe_pairs is None:
        # the metric's own highway chords are the pairs a reconstruction can
        # least afford to miss, so they always join the default probe set
        probe_pairs = _default_probe_pairs(dim, seed=seed) + [
            (hw.path.points[0], hw.path.points[-1]) for hw in metric.highways
        ]
    target_vals = np.array([ev(a, b) for a, b in probe_pairs])

    chain = HWChain.base(weights)
    paths: list[LipschitzPath] = []
    cum_tables = []
    diagnostics = []
    converged = False

    sampler = qmc.Halton(d=2 * dim, scramble=True, seed=seed)

    def candidates():
        for x, y in seed_pairs:
            geo, _ = metric.geodesic(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
            yield geo, "seed"
        for row in sampler.random(n_geodesics):
            x, y = row[:dim], row[dim:]
            if np.abs(x - y).sum() < 1e-9:
                continue
            geo, _ = metric.geodesic(x, y)
            yield geo, "halton"

    k = 0
    for cand, origin in candidates():
        if k >= n_geodesics + len(seed_pairs):
            break
        k += 1
        cand = remove_loops(cand)
        pieces = cut_path_against(cand, paths) if paths else [cand]
        for piece in pieces:
            if piece.length_l1 <= min_length:
                continue
            chain = hw_insert(chain, piece, metric, probe_pairs=probe_pairs,
                              tol=tol * 0.1, initial_access=initial_access)
            # tabulate the target distances along the kept piece
            ts = np.unique(np.concatenate([
                piece.cum.astype(float), np.linspace(0.0, piece.length_l1, initial_access)]))
            pts = piece.point_at(ts)
            incs = np.array([ev(pts[i], pts[i + 1]) for i in range(len(ts) - 1)])
            cum = np.concatenate([[0.0], np.cumsum(incs)])
            paths.append(piece)
            cum_tables.append((ts, cum))
        vals = np.array([chain.query(a, b) for a, b in probe_pairs])
        sup = float(np.max(np.abs(vals - target_vals))) if len(vals) else 0.0
        diagnostics.append({"k": k, "origin": origin, "sup_distance": sup,
                            "n_pieces": len(paths)})
        if sup <= tol:
            converged = True
            break

    return HighwayNetwork(weights=np.asarray(weights, dtype=float), paths=paths,
                          cum_tables=cum_tables, diagnostics=diagnostics,
                          converged=converged, chain=chain)


def network_from_highways(metric: NormPlusHighways, geodesy_tol: float = 1e-9) -> HighwayNetwork:
    """Package a metric's own highways as a network, after verifying each one
    actually realizes the metric along itself."""
    metric.validate_geodesics(tol=geodesy_tol)
    paths = [hw.path for hw in metric.highways]
    cum_tables = [(hw.ts.copy(), hw.cumd.copy()) for hw in metric.highways]
    chain = HWChain.base(metric.weights)
    for hw in metric.highways:
        chain = chain.insert(hw.path, hw.ts, hw.cumd)
    return HighwayNetwork(weights=metric.weights.copy(), paths=paths,
                          cum_tables=cum_tables, diagnostics=[], converged=True,
                          chain=chain)


# ---------------------------------------------------------------------------
# lengths, derivatives, gradients, integrals
# ---------------------------------------------------------------------------


def d_length(metric, path: LipschitzPath, tol: float = 1e-9, max_depth: int = 12,
             return_details: bool = False):
    """Length of a path in a pseudometric, by dyadic chain-sum refinement.

    The chain sums are nondecreasing under refinement by the triangle
    inequality, so the limit exists; refinement stops when one doubling moves
    the sum by at most ``tol`` relative to its size.  Raises
    :class:`RefinementError` when the budget is exhausted before that.
    """
    ev = _as_eval(metric)
    params = np.asarray(path.cum, dtype=float)
    pts = path.point_at(params)
    val = float(sum(ev(pts[i], pts[i + 1]) for i in range(len(params) - 1)))
    for depth in range(1, max_depth + 1):
        mids = 0.5 * (params[:-1] + params[1:])
        params = np.sort(np.concatenate([params, mids]))
        pts = path.point_at(params)
        new = float(sum(ev(pts[i], pts[i + 1]) for i in range(len(params) - 1)))
        if new - val <= tol * max(1.0, abs(new)):
            if return_details:
                return new, {"depth": depth, "n_points": len(params)}
            return new
        val = new
    raise RefinementError(
        f"chain sums still moving after {max_depth} doublings", last=new, previous=val)


@dataclass(frozen=True)
class MetricDerivative:
    value: float
    quotients: tuple[float, ...]
    spread: float
    one_sided_gap: float
    flagged: bool


def metric_derivative(metric, path: LipschitzPath, t: float, h0: float | None = None,
                      levels: int = 6, tol: float = 1e-6) -> MetricDerivative:
    """Metric speed of a path at an interior parameter.

    Symmetric difference quotients on a halving ladder, with one step of
    Richardson extrapolation.  The result is flagged when the extrapolated
    values have not settled at ``tol`` or when the one-sided quotients at the
    smallest step disagree, which is what happens at a breakpoint of the path
    or on a discount boundary.
    """
    total = path.length_l1
    if not (0.0 < t < total):
        raise GeometryError("parameter must be interior to the path")
    ev = _as_eval(metric)
    if h0 is None:
        h0 = min(t, total - t) / 4.0
    h0 = min(h0, t, total - t)
    hs = [h0 / 2 ** j for j in range(levels)]
    qs = []
    for h in hs:
        a = path.point_at(t - h)
        b = path.point_at(t + h)
        qs.append(ev(a, b) / (2.0 * h))
    rich = [2.0 * qs[j + 1] - qs[j] for j in range(len(qs) - 1)]
    value = rich[-1]
    spread = abs(rich[-1] - rich[-2]) if len(rich) >= 2 else math.inf
    h = hs[-1]
    mid = path.point_at(t)
    q_minus = ev(path.point_at(t - h), mid) / h
    q_plus = ev(mid, path.point_at(t + h)) / h
    gap = abs(q_plus - q_minus)
    flagged = spread > tol or gap > tol
    return MetricDerivative(value=float(value), quotients=tuple(qs),
                            spread=float(spread), one_sided_gap=float(gap),
                            flagged=bool(flagged))


@dataclass(frozen=True)
class GradientEstimate:
    value: float
    kind: str          # "analytic" | "upper-bound"
    boundary: bool = False
    note: str | None = None


def _locate_on_highways(metric: NormPlusHighways, z: np.ndarray):
    """(k, param, interior) if z lies on highway k, else None.  ``interior``
    is False at highway endpoints, geometric breakpoints, and discount
    breakpoints, where the tangent or the discount is one-sided."""
    zf = fvec(z)
    for k, hw in enumerate(metric.highways):
        fpts, cum = hw.path._frac
        for i in range(len(fpts) - 1):
            s = point_on_segment(zf, fpts[i], fpts[i + 1])
            if s is None:
                continue
            param = float(cum[i] + s * (cum[i + 1] - cum[i]))
            interior = 0 < param < hw.path.length_l1
            # breakpoints of the merged table carry direction or discount jumps
            for tt in hw.ts[1:-1]:
                if abs(param - tt) <= 1e-15:
                    interior = False
            return k, param, interior
    return None


def gradient_by_paths(metric, z, u, h_ladder=None) -> GradientEstimate:
    """Smallest initial metric speed over paths leaving z with velocity u.

    For a norm-plus-highways metric the value is analytic: a point off the
    highways, or a direction transverse to the local highway tangent, gives
    the norm of u, while the tangent direction gives the discounted norm.
    The reasoning for the transverse case: a path with initial velocity u
    transverse to the tangent stays off the highway for small positive time,
    so its initial speed is the norm speed.  Junctions, endpoints, and
    discount breakpoints are reported as boundary cases with a numeric
    straight-probe value, which is only an upper bound.  For any other metric
    the straight probe bound is returned.
    """
    z = np.asarray(z, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.abs(u).sum() == 0:
        return GradientEstimate(value=0.0, kind="analytic")

    if isinstance(metric, NormPlusHighways):
        loc = _locate_on_highways(metric, z)
        if loc is None:
            return GradientEstimate(value=float(metric.gnorm(u)), kind="analytic")
        k, param, interior = loc
        if interior:
            hw = metric.highways[k]
            i = int(np.searchsorted(hw.ts, param, side="right")) - 1
            i = min(i, len(hw.ts) - 2)
            direction = hw.pts[i + 1] - hw.pts[i]
            if _parallel(fvec(u), fvec(direction)):
                lam = hw.lam_at(param)
                return GradientEstimate(value=float(lam * metric.gnorm(u)), kind="analytic")
            return GradientEstimate(value=float(metric.gnorm(u)), kind="analytic")
        note = (f"z is an endpoint, junction, or discount breakpoint of highway {k}; "
                f"returning the norm value, which is an upper bound there")
        return GradientEstimate(value=float(metric.gnorm(u)), kind="upper-bound",
                                boundary=True, note=note)

    return GradientEstimate(value=_straight_probe(metric, z, u, h_ladder), kind="upper-bound")


def _straight_probe(metric, z, u, h_ladder=None) -> float:
    ev = _as_eval(metric)
    z = np.asarray(z, dtype=float)
    u = np.asarray(u, dtype=float)
    if h_ladder is None:
        h_ladder = [2.0 ** (-j) for j in range(3, 11)]
    best = math.inf
    for h in h_ladder:
        w = z + h * u
        if np.any(w < 0.0) or np.any(w > 1.0):
            continue
        best = min(best, ev(z, w) / h)
    if not math.isfinite(best):
        raise GeometryError("no probe step keeps z + h u inside the cube")
    return float(best)


def hausdorff_integrate(paths: Sequence[LipschitzPath], integrand: Callable,
                        order: int = 8, validate: bool = True) -> float:
    """Integral of ``integrand(point, unit_euclidean_tangent)`` over the union
    of the paths with respect to one-dimensional Hausdorff measure.

    The paths must be injective and may share at most isolated points, so the
    union integral is the sum of the path integrals; Gauss-Legendre quadrature
    on each linear piece is exact for polynomial integrands up to the rule
    degree and exact for integrands constant per piece, the case of interest.
    """
    if validate:
        for i, p in enumerate(paths):
            if not p.is_injective():
                raise GeometryError(f"path {i} is not injective")
        ok, _ = paths_pairwise_disjoint(paths, allow_touch=True)
        if not ok:
            raise GeometryError("paths overlap on positive length")
    xs, ws = np.polynomial.legendre.leggauss(order)
    total = 0.0
    for path in paths:
        for p0, p1, _, _ in path.pieces():
            delta = p1 - p0
            elen = float(np.linalg.norm(delta))
            if elen == 0.0:
                continue
            tang = delta / elen
            mid = 0.5 * (p0 + p1)
            half = 0.5 * delta
            for xq, wq in zip(xs, ws):
                total += 0.5 * elen * wq * float(integrand(mid + xq * half, tang))
    return total
