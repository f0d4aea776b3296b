"""Passage times on boxes: restricted shortest paths, rescaled and continuous
box metrics, disjoint lattice paths, hubs, and geodesic length statistics.

Conventions.  A weight field lives on the box [0, n]^d (see
:mod:`fpplab.model`).  The rescaled pseudometric on X = [0, 1]^d evaluates
grid pairs as (1/n) T(floor(nx), floor(ny)) where T is the passage time
restricted to the box.  Unreachable pairs (under a region restriction that
disconnects them) get the value ``math.inf`` rather than an exception.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field as dc_field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra as _scipy_dijkstra

from fpplab.model import LatticeBox, WeightField, _adjacency, _edge_arrays

__all__ = [
    "DiscretePath",
    "path_time",
    "restricted_passage_time",
    "RescaledMetric",
    "rescaled_metric",
    "ContinuousMetric",
    "continuous_metric",
    "uniform_gap",
    "GapReport",
    "disjoint_paths",
    "HubReport",
    "hub_check",
    "geodesic_length_stats",
]


@dataclass(frozen=True)
class DiscretePath:
    """A nearest-neighbour lattice path, stored as its vertex coordinates."""

    vertices: np.ndarray  # (r + 1, d) integer array

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.int64)
        object.__setattr__(self, "vertices", v)
        if v.ndim != 2 or len(v) < 1:
            raise ValueError("a path needs at least one vertex")
        if len(v) > 1:
            steps = np.abs(np.diff(v, axis=0)).sum(axis=1)
            if np.any(steps != 1):
                raise ValueError("consecutive path vertices must be lattice neighbours")

    @property
    def hops(self) -> int:
        return len(self.vertices) - 1

    def endpoints(self) -> tuple[tuple, tuple]:
        return tuple(self.vertices[0]), tuple(self.vertices[-1])

    def is_vertex_self_avoiding(self) -> bool:
        seen = set(map(tuple, self.vertices))
        return len(seen) == len(self.vertices)


def path_time(path: DiscretePath, field: WeightField) -> float:
    """Sum of edge weights along a path; raises if an edge leaves the box."""
    total = 0.0
    v = path.vertices
    for i in range(len(v) - 1):
        total += field.weights[field.box.edge_id(v[i], v[i + 1])]
    return total


# ---------------------------------------------------------------------------
# region restrictions


def _region_mask(box: LatticeBox, region) -> np.ndarray | None:
    """Normalise a region spec to a boolean mask over flat vertex ids.

    Accepts ``None`` (whole box), a per-axis tuple of (lo, hi) coordinate
    bounds (a sub-box / cylinder), or an iterable of vertex coordinate tuples.
    """
    if region is None:
        return None
    if isinstance(region, tuple) and len(region) == box.dimension and all(
        isinstance(r, (tuple, list)) and len(r) == 2 for r in region
    ):
        coords = box.all_vertex_coords()
        mask = np.ones(box.n_vertices, dtype=bool)
        for axis, (lo, hi) in enumerate(region):
            mask &= (coords[:, axis] >= lo) & (coords[:, axis] <= hi)
        return mask
    mask = np.zeros(box.n_vertices, dtype=bool)
    for v in region:
        mask[box.vertex_id(v)] = True
    return mask


# ---------------------------------------------------------------------------
# shortest-path engines

_DIAL_LIMIT = 1 << 22


def _dijkstra_heap(indptr, nbrs, eids, w, source: int, mask, n_vertices: int):
    dist = np.full(n_vertices, math.inf)
    pred = np.full(n_vertices, -1, dtype=np.int64)
    settled = np.zeros(n_vertices, dtype=bool)
    dist[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        du, u = heapq.heappop(heap)
        if settled[u]:
            continue
        settled[u] = True
        for k in range(indptr[u], indptr[u + 1]):
            v = nbrs[k]
            if mask is not None and not mask[v]:
                continue
            nd = du + w[eids[k]]
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
            elif nd == dist[v] and not settled[v] and (pred[v] < 0 or u < pred[v]):
                pred[v] = u
    return dist, pred


def _dijkstra_dial(indptr, nbrs, eids, w_int, source: int, mask, n_vertices: int, max_dist: int):
    """Bucket-queue variant for small nonnegative integer weights."""
    inf = max_dist + 1
    dist = np.full(n_vertices, inf, dtype=np.int64)
    pred = np.full(n_vertices, -1, dtype=np.int64)
    settled = np.zeros(n_vertices, dtype=bool)
    buckets: list[list[int]] = [[] for _ in range(max_dist + 1)]
    dist[source] = 0
    buckets[0].append(source)
    for cur in range(max_dist + 1):
        bucket = buckets[cur]
        while bucket:
            u = bucket.pop()
            if settled[u] or dist[u] != cur:
                continue
            settled[u] = True
            du = cur
            for k in range(indptr[u], indptr[u + 1]):
                v = nbrs[k]
                if mask is not None and not mask[v]:
                    continue
                nd = du + w_int[eids[k]]
                if nd < dist[v]:
                    dist[v] = nd
                    pred[v] = u
                    if nd <= max_dist:
                        buckets[nd].append(v)
                elif nd == dist[v] and not settled[v] and (pred[v] < 0 or u < pred[v]):
                    pred[v] = u
    out = dist.astype(np.float64)
    out[dist == inf] = math.inf
    return out, pred


def _reconstruct(pred, source: int, target: int, box: LatticeBox) -> DiscretePath:
    chain = [target]
    while chain[-1] != source:
        p = pred[chain[-1]]
        if p < 0:
            raise AssertionError("broken predecessor chain")
        chain.append(int(p))
    chain.reverse()
    return DiscretePath(box.vertex_coords(np.asarray(chain)))


def restricted_passage_time(
    field: WeightField,
    x,
    y,
    region=None,
    return_path: bool = False,
    method: str = "auto",
):
    """Passage time between vertices x and y among paths staying in a region.

    Parameters
    ----------
    field : WeightField
    x, y : vertex coordinates (length-d integer sequences)
    region : None for the whole box, a per-axis ((lo, hi), ...) sub-box, or
        an explicit iterable of vertex coordinates.
    return_path : also return the geodesic as a :class:`DiscretePath`.
        Ties are broken toward the lexicographically smallest predecessor so
        reruns reconstruct the same geodesic.
    method : "auto", "heap" or "dial".  "dial" is the bucket-queue engine,
        valid only for small nonnegative integer weights; "auto" picks it
        when applicable.  Both engines return identical values.

    Returns ``math.inf`` (and ``None`` for the path) when the restriction
    disconnects x from y.
    """
    box = field.box
    mask = _region_mask(box, region)
    sid, tid = box.vertex_id(x), box.vertex_id(y)
    if mask is not None and not (mask[sid] and mask[tid]):
        raise ValueError("both endpoints must belong to the region")
    indptr, nbrs, eids = _adjacency(box.dimension, box.side)
    w = field.weights

    use_dial = False
    if method not in ("auto", "heap", "dial"):
        raise ValueError(f"unknown method {method!r}")
    if method in ("auto", "dial"):
        w_int = np.rint(w).astype(np.int64)
        integral = bool(np.all(w == w_int) and np.all(w_int >= 0))
        if integral:
            ub = int(w_int.max(initial=0)) * box.dimension * box.side * 2 + 1
            use_dial = integral and ub <= _DIAL_LIMIT
        if method == "dial" and not use_dial:
            raise ValueError("dial engine needs small nonnegative integer weights")

    if use_dial:
        ub = int(np.rint(w).astype(np.int64).max(initial=0)) * box.dimension * box.side * 2 + 1
        dist, pred = _dijkstra_dial(
            indptr, nbrs, eids, np.rint(w).astype(np.int64), sid, mask, box.n_vertices, ub
        )
    else:
        dist, pred = _dijkstra_heap(indptr, nbrs, eids, w, sid, mask, box.n_vertices)

    t = float(dist[tid])
    if not return_path:
        return t
    if math.isinf(t):
        return t, None
    return t, _reconstruct(pred, sid, tid, box)


def _box_csr(field: WeightField) -> sp.csr_matrix:
    box = field.box
    _, _, (u_flat, v_flat) = _edge_arrays(box.dimension, box.side)
    row = np.concatenate([u_flat, v_flat])
    col = np.concatenate([v_flat, u_flat])
    dat = np.concatenate([field.weights, field.weights])
    return sp.csr_matrix((dat, (row, col)), shape=(box.n_vertices, box.n_vertices))


# ---------------------------------------------------------------------------
# rescaled box pseudometric


class RescaledMetric:
    """All-pairs rescaled passage times on a set of grid points.

    Values are (1/n) T(floor(nx), floor(ny)) for x, y in [0, 1]^d whose floors
    are among the stored points.  The raw matrix is symmetrised by a pointwise
    min with its transpose; the two triangular halves agree up to float
    rounding and the min removes that rounding asymmetry.
    """

    def __init__(self, field: WeightField, points: np.ndarray, raw_times: np.ndarray):
        self.field = field
        self.n = field.box.side
        self.points = points
        self.raw_times = np.minimum(raw_times, raw_times.T)
        self._index = {tuple(p): i for i, p in enumerate(points)}

    @property
    def matrix(self) -> np.ndarray:
        """Rescaled all-pairs values, (1/n) T."""
        return self.raw_times / self.n

    def vertex_value(self, u, v) -> float:
        iu = self._index.get(tuple(int(c) for c in u))
        iv = self._index.get(tuple(int(c) for c in v))
        if iu is None or iv is None:
            raise KeyError("vertex not among the stored grid points")
        return float(self.raw_times[iu, iv]) / self.n

    def value(self, x, y) -> float:
        """T-hat at continuum points of X, through the floor map."""
        u = np.floor(np.asarray(x, dtype=float) * self.n).astype(np.int64)
        v = np.floor(np.asarray(y, dtype=float) * self.n).astype(np.int64)
        u = np.minimum(u, self.n)
        v = np.minimum(v, self.n)
        return self.vertex_value(u, v)

    def write_csv(self, path) -> None:
        """RFC 4180 CSV; one row per source point, row-major vertex labels."""
        import csv

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\r\n")
            labels = ["_".join(map(str, p)) for p in self.points]
            writer.writerow(["source"] + labels)
            for lbl, row in zip(labels, self.matrix):
                writer.writerow([lbl] + [repr(float(v)) for v in row])


def rescaled_metric(field: WeightField, points=None) -> RescaledMetric:
    """Rescaled box pseudometric on a grid subset, one Dijkstra per source."""
    box = field.box
    if points is None:
        if box.n_vertices > 4097:
            raise ValueError(
                "all-pairs on a box this large is not supported; pass an explicit grid subset"
            )
        pts = box.all_vertex_coords()
    else:
        pts = np.asarray(points, dtype=np.int64)
        if pts.ndim == 1:
            pts = pts[None, :]
    ids = box.vertex_id(pts) if pts.ndim == 2 else np.array([box.vertex_id(pts)])
    ids = np.atleast_1d(np.asarray(ids, dtype=np.int64))
    G = _box_csr(field)
    dist = _scipy_dijkstra(G, directed=True, indices=ids)
    return RescaledMetric(field, pts, dist[:, ids])


# ---------------------------------------------------------------------------
# continuous interpolation of the truncated metric


class ContinuousMetric:
    """Continuous extension of the truncated box metric to all of X = [0,1]^d.

    Between two continuum points the value is the minimum of the direct cost
    b |x - y|_1 and the best route that pays b per unit l1 distance to reach a
    point on some edge, rides that edge linearly into one of its endpoints,
    crosses the lattice at truncated passage times, and exits symmetrically.
    Per-edge objectives are piecewise linear in the entry point, so minimising
    over the entry candidates {endpoints, coordinate projection} is exact.
    Values coincide with the truncated rescaled metric on grid points, and
    deviate from it by at most 2bd/n uniformly.
    """

    def __init__(self, field: WeightField, b: float):
        self.b = float(b)
        if self.b <= 0:
            raise ValueError("truncation level b must be positive")
        self.field = field.truncated(self.b)
        box = field.box
        self.box = box
        self.n = box.side
        self.d = box.dimension
        self.coords = box.all_vertex_coords().astype(np.float64)
        # per-axis weight grids; grid[a][u] = weight of edge (u, u + e_a)
        self.wgrid = []
        offset = 0
        for axis in range(self.d):
            shape = [self.n + 1] * self.d
            shape[axis] = self.n
            size = int(np.prod(shape))
            self.wgrid.append(self.field.weights[offset: offset + size].reshape(shape))
            offset += size
        self._indptr, self._nbrs, self._eids = _adjacency(self.d, self.n)
        self._dist_cache: dict[tuple, np.ndarray] = {}

    def access_costs(self, X: np.ndarray) -> np.ndarray:
        """c_X(u): cheapest way to reach vertex u from continuum point X
        through a single free leg plus a partial ride of an edge at u."""
        X = np.asarray(X, dtype=np.float64)
        delta = X[None, :] - self.coords  # (V, d)
        absd = np.abs(delta)
        s1 = absd.sum(axis=1)
        best = self.b * s1  # entry at the vertex itself
        V = len(self.coords)
        for axis in range(self.d):
            base_wo = s1 - absd[:, axis]
            da = delta[:, axis]
            cvals = self.coords[:, axis]
            wplus = np.full(V, math.inf)
            has_plus = cvals < self.n
            idx_plus = np.nonzero(has_plus)[0]
            wplus[idx_plus] = self.wgrid[axis].reshape(-1)[
                self._plus_edge_index(idx_plus, axis)
            ]
            wminus = np.full(V, math.inf)
            has_minus = cvals > 0
            idx_minus = np.nonzero(has_minus)[0]
            wminus[idx_minus] = self.wgrid[axis].reshape(-1)[
                self._minus_edge_index(idx_minus, axis)
            ]
            with np.errstate(invalid="ignore"):
                # full ride from the far endpoint
                cand = self.b * (base_wo + np.abs(da - 1.0)) + wplus
                np.minimum(best, cand, out=best)
                cand = self.b * (base_wo + np.abs(da + 1.0)) + wminus
                np.minimum(best, cand, out=best)
                # entry at the orthogonal projection, when it is interior
                proj_plus = (da > 0.0) & (da < 1.0)
                cand = self.b * base_wo + da * wplus
                np.minimum(best, np.where(proj_plus, cand, math.inf), out=best)
                proj_minus = (da < 0.0) & (da > -1.0)
                cand = self.b * base_wo + (-da) * wminus
                np.minimum(best, np.where(proj_minus, cand, math.inf), out=best)
        return best

    def _plus_edge_index(self, vertex_ids, axis):
        c = self.box.vertex_coords(vertex_ids)
        shape = [self.n + 1] * self.d
        shape[axis] = self.n
        return np.ravel_multi_index(tuple(np.asarray(c).T), shape)

    def _minus_edge_index(self, vertex_ids, axis):
        c = self.box.vertex_coords(vertex_ids).copy()
        c[:, axis] -= 1
        shape = [self.n + 1] * self.d
        shape[axis] = self.n
        return np.ravel_multi_index(tuple(np.asarray(c).T), shape)

    def _dist_from(self, X: np.ndarray) -> np.ndarray:
        key = tuple(np.asarray(X, dtype=np.float64))
        hit = self._dist_cache.get(key)
        if hit is not None:
            return hit
        seed_cost = self.access_costs(np.asarray(X))
        V = self.box.n_vertices
        dist = seed_cost.copy()
        settled = np.zeros(V, dtype=bool)
        heap = [(float(c), int(i)) for i, c in enumerate(seed_cost) if math.isfinite(c)]
        heapq.heapify(heap)
        w = self.field.weights
        indptr, nbrs, eids = self._indptr, self._nbrs, self._eids
        while heap:
            du, u = heapq.heappop(heap)
            if settled[u] or du > dist[u]:
                continue
            settled[u] = True
            for k in range(indptr[u], indptr[u + 1]):
                v = nbrs[k]
                nd = du + w[eids[k]]
                if nd < dist[v]:
                    dist[v] = nd
                    heapq.heappush(heap, (nd, v))
        self._dist_cache[key] = dist
        return dist

    def evaluate(self, x, y) -> float:
        """Value at continuum points x, y of X = [0, 1]^d (rescaled by 1/n)."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if np.any(x < 0) or np.any(x > 1) or np.any(y < 0) or np.any(y > 1):
            raise ValueError("points must lie in [0, 1]^d")
        X, Y = self.n * x, self.n * y
        direct = self.b * float(np.abs(X - Y).sum())
        dX = self._dist_from(X)
        cY = self.access_costs(Y)
        through = float(np.min(dX + cY))
        return min(direct, through) / self.n


def continuous_metric(field: WeightField, b: float) -> ContinuousMetric:
    return ContinuousMetric(field, b)


@dataclass(frozen=True)
class GapReport:
    gap: float
    bound: float
    n_pairs: int
    within_bound: bool


def uniform_gap(field: WeightField, b: float, eval_points=None, seed: int = 0) -> GapReport:
    """Sup over sampled pairs of |T-hat^(b) - T-tilde|, with its 2bd/n bound.

    The default evaluation set mixes the two main corners, grid-aligned
    points, and seeded uniform points of X, so both exact-grid and strictly
    interior behaviour are exercised.
    """
    box = field.box
    n, d = box.side, box.dimension
    if eval_points is None:
        rng = np.random.default_rng(seed)
        pts = [np.zeros(d), np.ones(d), np.full(d, 0.5)]
        pts.append(np.minimum(1.0, np.floor(rng.uniform(0, n + 1, size=d)) / n))
        pts.extend(rng.uniform(0, 1, size=(6, d)))
        eval_points = np.clip(np.asarray(pts), 0.0, 1.0)
    else:
        eval_points = np.asarray(eval_points, dtype=np.float64)

    tf = field.truncated(b)
    floors = np.minimum(np.floor(eval_points * n).astype(np.int64), n)
    ids = np.atleast_1d(box.vertex_id(floors))
    G = _box_csr(tf)
    disc = _scipy_dijkstra(G, directed=True, indices=ids)[:, ids] / n

    cm = ContinuousMetric(field, b)
    k = len(eval_points)
    worst = 0.0
    pairs = 0
    for i in range(k):
        for j in range(i + 1, k):
            tv = cm.evaluate(eval_points[i], eval_points[j])
            worst = max(worst, abs(float(disc[i, j]) - tv))
            pairs += 1
    bound = 2.0 * b * d / n
    return GapReport(gap=worst, bound=bound, n_pairs=pairs, within_bound=worst <= bound + 1e-12)


# ---------------------------------------------------------------------------
# disjoint lattice paths


def disjoint_paths(box: LatticeBox, x, y) -> list[DiscretePath]:
    """d vertex-disjoint (except at endpoints) lattice paths from x to y.

    The paths stay in the box.  Axes where the endpoints agree contribute a
    detour path shifted off the base monotone path (length |x-y|_1 + 2); axes
    where they differ contribute a staircase visiting the axes in cyclic
    order (length |x-y|_1).  Works for any distinct pair of box vertices.
    """
    d, n = box.dimension, box.side
    x0 = np.asarray(x, dtype=np.int64)
    y0 = np.asarray(y, dtype=np.int64)
    if x0.shape != (d,) or y0.shape != (d,):
        raise ValueError("endpoints must be length-d coordinate vectors")
    if np.any(x0 < 0) or np.any(x0 > n) or np.any(y0 < 0) or np.any(y0 > n):
        raise ValueError("endpoints must lie in the box")
    if np.array_equal(x0, y0):
        raise ValueError("endpoints must be distinct")

    # normalise: reflect so equal coordinates sit strictly below n and
    # unequal ones increase, then order equal axes first
    flip = np.zeros(d, dtype=bool)
    for i in range(d):
        if x0[i] == y0[i]:
            flip[i] = x0[i] == n
        else:
            flip[i] = x0[i] > y0[i]
    xr = np.where(flip, n - x0, x0)
    yr = np.where(flip, n - y0, y0)
    equal_axes = [i for i in range(d) if xr[i] == yr[i]]
    diff_axes = [i for i in range(d) if xr[i] != yr[i]]
    perm = equal_axes + diff_axes  # new axis j is original axis perm[j]
    xn = xr[perm]
    yn = yr[perm]
    i0 = len(equal_axes)

    def denormalise(path_coords: list[np.ndarray]) -> DiscretePath:
        arr = np.stack(path_coords)
        orig = np.empty_like(arr)
        for j, a in enumerate(perm):
            orig[:, a] = arr[:, j]
        orig = np.where(flip[None, :], n - orig, orig)
        return DiscretePath(orig)

    def staircase(start: np.ndarray, target: np.ndarray, axis_order: list[int]) -> list[np.ndarray]:
        cur = start.copy()
        out = [cur.copy()]
        for a in axis_order:
            while cur[a] != target[a]:
                cur[a] += 1 if target[a] > cur[a] else -1
                out.append(cur.copy())
        return out

    base = staircase(xn, yn, list(range(i0, d)))

    paths = []
    for i in range(i0):
        shifted = [p.copy() for p in base]
        for p in shifted:
            p[i] += 1
        paths.append(denormalise([xn.copy()] + shifted + [yn.copy()]))
    m = d - i0
    for k in range(m):
        order = [i0 + ((k + j) % m) for j in range(m)]
        paths.append(denormalise(staircase(xn, yn, order)))
    return paths


# ---------------------------------------------------------------------------
# hubs


@dataclass(frozen=True)
class HubReport:
    vertex: tuple
    kappa: float
    is_hub: bool
    worst_time_slack: float
    worst_time_slack_target: tuple
    worst_hop_slack: int | None
    n_targets: int

    def to_json(self) -> dict:
        return {
            "vertex": list(self.vertex),
            "kappa": self.kappa,
            "is_hub": self.is_hub,
            "worst_time_slack": self.worst_time_slack,
            "worst_time_slack_target": list(self.worst_time_slack_target),
            "worst_hop_slack": self.worst_hop_slack,
            "n_targets": self.n_targets,
        }


def hub_check(field: WeightField, x, kappa: float) -> HubReport:
    """Is x a hub: every target y admits a path with time at most
    kappa |x-y|_1 using at most 2 |x-y|_1 + 4 hops?

    A hop-layered relaxation computes, for every h, the cheapest time from x
    within h hops; target y is served by the value at its own hop budget.
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    box = field.box
    sid = box.vertex_id(x)
    coords = box.all_vertex_coords()
    l1 = np.abs(coords - np.asarray(x, dtype=np.int64)[None, :]).sum(axis=1)
    hop_budget = 2 * l1 + 4
    time_budget = kappa * l1.astype(np.float64)
    h_max = int(hop_budget.max())

    _, _, (u_flat, v_flat) = _edge_arrays(box.dimension, box.side)
    w = field.weights
    cur = np.full(box.n_vertices, math.inf)
    cur[sid] = 0.0
    vals = np.full(box.n_vertices, math.inf)
    first_ok = np.full(box.n_vertices, -1, dtype=np.int64)
    first_ok[(cur <= time_budget)] = 0
    vals[hop_budget == 0] = cur[hop_budget == 0]
    for h in range(1, h_max + 1):
        nxt = cur.copy()
        np.minimum.at(nxt, v_flat, cur[u_flat] + w)
        np.minimum.at(nxt, u_flat, cur[v_flat] + w)
        cur = nxt
        newly = (first_ok < 0) & (cur <= time_budget)
        first_ok[newly] = h
        at_budget = hop_budget == h
        vals[at_budget] = cur[at_budget]

    ok = vals <= time_budget
    is_hub = bool(np.all(ok))
    time_slack = time_budget - vals
    # the source satisfies its own budgets trivially; report slack over others
    time_slack_view = time_slack.copy()
    time_slack_view[sid] = math.inf
    worst_idx = int(np.argmin(time_slack_view))
    hop_slacks = np.where(first_ok >= 0, hop_budget - first_ok, -1)
    reached = hop_slacks[first_ok >= 0]
    worst_hop = int(reached.min()) if len(reached) else None
    return HubReport(
        vertex=tuple(int(c) for c in np.asarray(x)),
        kappa=float(kappa),
        is_hub=is_hub,
        worst_time_slack=float(time_slack[worst_idx]),
        worst_time_slack_target=tuple(int(c) for c in coords[worst_idx]),
        worst_hop_slack=worst_hop,
        n_targets=int(box.n_vertices),
    )


# ---------------------------------------------------------------------------
# geodesic length statistics


def geodesic_length_stats(
    field: WeightField,
    b: float,
    L_values: Sequence[float],
    n_random_pairs: int = 8,
    seed: int = 0,
) -> dict:
    """Hop counts of truncated-field geodesics and long-geodesic indicators.

    Samples corner-to-corner plus seeded random vertex pairs, records the
    geodesic edge counts under the b-truncated weights, and for each L in the
    ladder reports whether some sampled geodesic has at least L n edges.
    """
    box = field.box
    n, d = box.side, box.dimension
    tf = field.truncated(b)
    rng = np.random.default_rng(seed)
    pairs = [(np.zeros(d, dtype=np.int64), np.full(d, n, dtype=np.int64))]
    pairs.append((np.zeros(d, dtype=np.int64), np.array([n] + [0] * (d - 1))))
    for _ in range(n_random_pairs):
        u = rng.integers(0, n + 1, size=d)
        v = rng.integers(0, n + 1, size=d)
        if np.array_equal(u, v):
            continue
        pairs.append((u, v))
    records = []
    for u, v in pairs:
        t, path = restricted_passage_time(tf, u, v, return_path=True)
        records.append(
            {"source": tuple(map(int, u)), "target": tuple(map(int, v)),
             "time": float(t), "hops": int(path.hops) if path is not None else -1}
        )
    max_hops = max(r["hops"] for r in records)
    ladder = [
        {"L": float(L), "threshold_hops": float(L) * n, "long_geodesic": max_hops >= float(L) * n}
        for L in L_values
    ]
    return {"pairs": records, "max_hops": max_hops, "ladder": ladder}
