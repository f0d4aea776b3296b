"""Edge-weight laws and lattice boxes for first-passage percolation.

The model layer owns three things: the distribution of a single edge weight,
the finite box of the nearest-neighbour lattice on which everything is
simulated, and the sampled field of i.i.d. weights attached to the edges of
that box.  Sampling is counter-based: every edge derives its uniform from a
hash of the master seed and the edge's lattice coordinates, so regenerating a
field is bit-identical and enlarging the box never changes the weights of
edges the smaller box already contained.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "MomentClass",
    "EdgeDistribution",
    "truncate",
    "LatticeBox",
    "WeightField",
    "sample_weights",
    "subcritical_atom_check",
    "BOND_PERCOLATION_THRESHOLD",
]


class MomentClass(str, Enum):
    """Best integrability class a law is known to satisfy.

    ``BOUNDED`` implies ``ALL_EXPONENTIAL`` implies ``MIN_MOMENT`` (the
    finite (d + xi)-th moment of the minimum of d independent copies); the
    enum records the strongest one.
    """

    BOUNDED = "bounded"
    ALL_EXPONENTIAL = "all-exponential-moments"
    MIN_MOMENT = "min-moment-d-plus-xi"
    NONE = "none"


_MOMENT_ORDER = {
    MomentClass.BOUNDED: 3,
    MomentClass.ALL_EXPONENTIAL: 2,
    MomentClass.MIN_MOMENT: 1,
    MomentClass.NONE: 0,
}


def _as_fraction(x) -> Fraction:
    """Exact conversion; floats convert via their binary value, which is exact."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError("probability must be finite")
        return Fraction(x)
    raise TypeError(f"cannot convert {type(x).__name__} to an exact rational")


@dataclass(frozen=True)
class EdgeDistribution:
    """Law of a single nonnegative edge weight.

    Construct through the classmethods rather than directly; they normalise
    parameters and record the support infimum and moment class.  Atom-bearing
    laws keep their probabilities as exact rationals so that enumeration
    oracles can report exact event probabilities.
    """

    kind: str
    params: tuple
    support_infimum: float
    moment_class: MomentClass

    # -- constructors -----------------------------------------------------

    @classmethod
    def deterministic(cls, c: float) -> "EdgeDistribution":
        c = float(c)
        if c < 0:
            raise ValueError("edge weights must be nonnegative")
        return cls("deterministic", (c,), c, MomentClass.BOUNDED)

    @classmethod
    def two_point(cls, lo: float, hi: float, p_lo) -> "EdgeDistribution":
        """Weight ``lo`` with probability ``p_lo``, else ``hi``.

        ``p_lo`` may be a :class:`~fractions.Fraction` for exact decimal
        probabilities; floats are taken at their exact binary value.
        """
        lo, hi = float(lo), float(hi)
        if lo < 0:
            raise ValueError("edge weights must be nonnegative")
        if not lo < hi:
            raise ValueError("two-point law needs lo < hi")
        p = _as_fraction(p_lo)
        if not 0 < p < 1:
            raise ValueError("p_lo must lie strictly between 0 and 1")
        return cls("two_point", (lo, hi, p), lo, MomentClass.BOUNDED)

    @classmethod
    def uniform(cls, a: float, b: float) -> "EdgeDistribution":
        a, b = float(a), float(b)
        if a < 0:
            raise ValueError("edge weights must be nonnegative")
        if not a < b:
            raise ValueError("uniform law needs a < b")
        return cls("uniform", (a, b), a, MomentClass.BOUNDED)

    @classmethod
    def exponential(cls, rate: float, shift: float = 0.0) -> "EdgeDistribution":
        rate, shift = float(rate), float(shift)
        if rate <= 0:
            raise ValueError("rate must be positive")
        if shift < 0:
            raise ValueError("shift must be nonnegative")
        return cls("exponential", (rate, shift), shift, MomentClass.ALL_EXPONENTIAL)

    @classmethod
    def finite_support(cls, values: Sequence[float], probs: Sequence) -> "EdgeDistribution":
        vals = [float(v) for v in values]
        ps = [_as_fraction(p) for p in probs]
        if len(vals) != len(ps) or not vals:
            raise ValueError("values and probs must be equal-length and nonempty")
        if any(v < 0 for v in vals):
            raise ValueError("edge weights must be nonnegative")
        if any(p < 0 for p in ps):
            raise ValueError("probabilities must be nonnegative")
        if sum(ps) != 1:
            raise ValueError("probabilities must sum to one exactly")
        merged: dict[float, Fraction] = {}
        for v, p in zip(vals, ps):
            if p > 0:
                merged[v] = merged.get(v, Fraction(0)) + p
        items = sorted(merged.items())
        return cls(
            "finite_support",
            (tuple(v for v, _ in items), tuple(p for _, p in items)),
            items[0][0],
            MomentClass.BOUNDED,
        )

    @classmethod
    def _truncated(cls, base: "EdgeDistribution", cap: float) -> "EdgeDistribution":
        return cls("truncated", (base, float(cap)), base.support_infimum, MomentClass.BOUNDED)

    # -- basic structure ---------------------------------------------------

    @property
    def is_finite_support(self) -> bool:
        return self.kind in ("deterministic", "two_point", "finite_support")

    def atoms(self) -> tuple[tuple[float, ...], tuple[Fraction, ...]]:
        """Support values and exact probabilities of a finite-support law."""
        if self.kind == "deterministic":
            return (self.params[0],), (Fraction(1),)
        if self.kind == "two_point":
            lo, hi, p = self.params
            return (lo, hi), (p, 1 - p)
        if self.kind == "finite_support":
            return self.params[0], self.params[1]
        raise ValueError(f"{self.kind} law has no finite atom table")

    def support_supremum(self) -> float:
        if self.kind == "deterministic":
            return self.params[0]
        if self.kind == "two_point":
            return self.params[1]
        if self.kind == "finite_support":
            return self.params[0][-1]
        if self.kind == "uniform":
            return self.params[1]
        if self.kind == "exponential":
            return math.inf
        if self.kind == "truncated":
            base, cap = self.params
            return min(base.support_supremum(), cap)
        raise AssertionError(self.kind)

    def atom_at_zero(self) -> Fraction:
        """Exact mass at zero, nu({0})."""
        if self.kind == "truncated":
            base, cap = self.params
            if cap == 0.0:
                return Fraction(1)
            return base.atom_at_zero()
        if self.is_finite_support:
            values, probs = self.atoms()
            for v, p in zip(values, probs):
                if v == 0.0:
                    return p
            return Fraction(0)
        return Fraction(0)

    # -- distribution functions -------------------------------------------

    def cdf(self, t: float) -> float:
        """P(tau <= t)."""
        if self.kind == "truncated":
            base, cap = self.params
            return 1.0 if t >= cap else base.cdf(t)
        if self.is_finite_support:
            values, probs = self.atoms()
            return float(sum(p for v, p in zip(values, probs) if v <= t))
        if self.kind == "uniform":
            a, b = self.params
            if t < a:
                return 0.0
            if t >= b:
                return 1.0
            return (t - a) / (b - a)
        if self.kind == "exponential":
            rate, shift = self.params
            if t < shift:
                return 0.0
            return -math.expm1(-rate * (t - shift))
        raise AssertionError(self.kind)

    def cdf_fraction(self, t: float) -> Fraction | None:
        """Exact rational CDF where the law supports it, else ``None``."""
        if self.is_finite_support:
            values, probs = self.atoms()
            return sum((p for v, p in zip(values, probs) if v <= t), Fraction(0))
        if self.kind == "truncated":
            base, cap = self.params
            if t >= cap:
                return Fraction(1)
            return base.cdf_fraction(t)
        return None

    def mean(self) -> float:
        if self.is_finite_support:
            values, probs = self.atoms()
            return float(sum(Fraction(v) * p for v, p in zip(values, probs)))
        if self.kind == "uniform":
            a, b = self.params
            return 0.5 * (a + b)
        if self.kind == "exponential":
            rate, shift = self.params
            return shift + 1.0 / rate
        if self.kind == "truncated":
            base, cap = self.params
            if base.kind == "uniform":
                a, b = base.params
                if cap >= b:
                    return base.mean()
                # uniform part on [a, cap) plus atom at cap
                w = (cap - a) / (b - a)
                return w * 0.5 * (a + cap) + (1 - w) * cap
            if base.kind == "exponential":
                rate, shift = base.params
                if cap <= shift:
                    return cap
                # E[min(tau, cap)] = shift + (1 - exp(-rate (cap - shift))) / rate
                return shift - math.expm1(-rate * (cap - shift)) / rate
            if base.is_finite_support:
                values, probs = base.atoms()
                return float(sum(Fraction(min(v, cap)) * p for v, p in zip(values, probs)))
            raise AssertionError(base.kind)
        raise AssertionError(self.kind)

    def mgf(self, lam: float) -> float:
        """E[exp(lam * tau)]; raises when the moment generating function diverges."""
        if self.is_finite_support:
            values, probs = self.atoms()
            return float(sum(float(p) * math.exp(lam * v) for v, p in zip(values, probs)))
        if self.kind == "uniform":
            a, b = self.params
            if lam == 0.0:
                return 1.0
            return (math.exp(lam * b) - math.exp(lam * a)) / (lam * (b - a))
        if self.kind == "exponential":
            rate, shift = self.params
            if lam >= rate:
                raise ValueError(f"mgf diverges for lam >= rate ({lam} >= {rate})")
            return math.exp(lam * shift) * rate / (rate - lam)
        if self.kind == "truncated":
            base, cap = self.params
            if base.is_finite_support:
                values, probs = base.atoms()
                return float(
                    sum(float(p) * math.exp(lam * min(v, cap)) for v, p in zip(values, probs))
                )
            if base.kind == "uniform":
                a, b = base.params
                hi = min(b, cap)
                mass_cont = (hi - a) / (b - a)
                if lam == 0.0:
                    cont = mass_cont
                else:
                    cont = (math.exp(lam * hi) - math.exp(lam * a)) / (lam * (b - a))
                return cont + (1.0 - mass_cont) * math.exp(lam * cap)
            if base.kind == "exponential":
                rate, shift = base.params
                if cap <= shift:
                    return math.exp(lam * cap)
                tail = math.exp(-rate * (cap - shift))
                if lam == rate:
                    cont = rate * (cap - shift) * math.exp(lam * shift)
                else:
                    cont = (
                        math.exp(lam * shift)
                        * rate
                        / (rate - lam)
                        * -math.expm1(-(rate - lam) * (cap - shift))
                    )
                return cont + tail * math.exp(lam * cap)
        raise AssertionError(self.kind)

    def log_mgf(self, lam: float) -> float:
        """log E[exp(lam * tau)], stable for very negative lam."""
        from scipy.special import logsumexp

        if self.is_finite_support:
            values, probs = self.atoms()
            terms = [lam * v + math.log(float(p)) for v, p in zip(values, probs)]
            return float(logsumexp(terms))
        if self.kind == "uniform":
            a, b = self.params
            if lam == 0.0:
                return 0.0
            z = lam * (b - a)
            # log((exp(z) - 1) / z), computed on whichever side is stable
            if z > 0:
                core = z + math.log(-math.expm1(-z)) - math.log(z)
            else:
                core = math.log(-math.expm1(z)) - math.log(-z)
            return lam * a + core
        if self.kind == "exponential":
            rate, shift = self.params
            if lam >= rate:
                raise ValueError(f"mgf diverges for lam >= rate ({lam} >= {rate})")
            return lam * shift + math.log(rate) - math.log(rate - lam)
        if self.kind == "truncated":
            base, cap = self.params
            if base.kind == "uniform":
                a, b = base.params
                hi = min(b, cap)
                if lam == 0.0:
                    return 0.0
                z = lam * (hi - a)
                if z > 0:
                    core = z + math.log(-math.expm1(-z)) - math.log(z)
                else:
                    core = math.log(-math.expm1(z)) - math.log(-z)
                cont = lam * a + math.log((hi - a) / (b - a)) + core
                tail_mass = (b - hi) / (b - a)
                if tail_mass == 0.0:
                    return cont
                return float(np.logaddexp(cont, math.log(tail_mass) + lam * cap))
            if base.kind == "exponential":
                rate, shift = base.params
                if cap <= shift:
                    return lam * cap
                log_tail = -rate * (cap - shift) + lam * cap
                if lam == rate:
                    log_cont = lam * shift + math.log(rate * (cap - shift))
                else:
                    # rate/(rate-lam) (1 - exp(-(rate-lam)(cap-shift))) e^{lam shift}
                    z = (rate - lam) * (cap - shift)
                    if z > 0:
                        inner = math.log(-math.expm1(-z))
                    else:
                        inner = z + math.log(-math.expm1(z))
                    log_cont = lam * shift + math.log(rate) - math.log(abs(rate - lam)) + inner
                    if rate - lam < 0:
                        raise AssertionError("unreachable: lam < rate ensures rate - lam > 0")
                return float(np.logaddexp(log_cont, log_tail))
            if base.is_finite_support:
                values, probs = base.atoms()
                terms = [lam * min(v, cap) + math.log(float(p)) for v, p in zip(values, probs)]
                return float(logsumexp(terms))
        raise AssertionError(self.kind)

    # -- sampling ----------------------------------------------------------

    def sample_from_uniforms(self, u: np.ndarray) -> np.ndarray:
        """Inverse-CDF transform of uniforms in [0, 1).

        Inverse-CDF sampling makes truncation a monotone coupling: for the
        same uniforms, the truncated law's sample equals ``min(sample, b)``
        of the base law exactly.
        """
        u = np.asarray(u, dtype=np.float64)
        if self.kind == "deterministic":
            return np.full(u.shape, self.params[0])
        if self.kind == "two_point":
            lo, hi, p = self.params
            return np.where(u < float(p), lo, hi)
        if self.kind == "uniform":
            a, b = self.params
            return a + u * (b - a)
        if self.kind == "exponential":
            rate, shift = self.params
            return shift - np.log1p(-u) / rate
        if self.kind == "finite_support":
            values, probs = self.params
            cuts = np.cumsum(np.asarray([float(p) for p in probs]))
            idx = np.searchsorted(cuts, u, side="right")
            idx = np.minimum(idx, len(values) - 1)
            return np.asarray(values, dtype=np.float64)[idx]
        if self.kind == "truncated":
            base, cap = self.params
            return np.minimum(base.sample_from_uniforms(u), cap)
        raise AssertionError(self.kind)

    def spec(self) -> dict:
        """Tagged record for config files and manifests."""
        if self.kind == "deterministic":
            return {"kind": "deterministic", "c": self.params[0]}
        if self.kind == "two_point":
            lo, hi, p = self.params
            return {"kind": "two_point", "lo": lo, "hi": hi,
                    "p_lo": {"num": p.numerator, "den": p.denominator}}
        if self.kind == "uniform":
            a, b = self.params
            return {"kind": "uniform", "a": a, "b": b}
        if self.kind == "exponential":
            rate, shift = self.params
            return {"kind": "exponential", "rate": rate, "shift": shift}
        if self.kind == "finite_support":
            values, probs = self.params
            return {"kind": "finite_support", "values": list(values),
                    "probs": [{"num": p.numerator, "den": p.denominator} for p in probs]}
        if self.kind == "truncated":
            base, cap = self.params
            return {"kind": "truncated", "base": base.spec(), "cap": cap}
        raise AssertionError(self.kind)

    @classmethod
    def from_spec(cls, rec: dict) -> "EdgeDistribution":
        kind = rec["kind"]
        if kind == "deterministic":
            return cls.deterministic(rec["c"])
        if kind == "two_point":
            return cls.two_point(rec["lo"], rec["hi"], _frac_of(rec["p_lo"]))
        if kind == "uniform":
            return cls.uniform(rec["a"], rec["b"])
        if kind == "exponential":
            return cls.exponential(rec["rate"], rec.get("shift", 0.0))
        if kind == "finite_support":
            return cls.finite_support(rec["values"], [_frac_of(p) for p in rec["probs"]])
        if kind == "truncated":
            return truncate(cls.from_spec(rec["base"]), rec["cap"])
        raise ValueError(f"unknown distribution kind {kind!r}")


def _frac_of(rec) -> Fraction:
    if isinstance(rec, dict):
        return Fraction(rec["num"], rec["den"])
    return _as_fraction(rec)


def truncate(dist: EdgeDistribution, b: float) -> EdgeDistribution:
    """Law of ``min(tau, b)``.

    Finite-support laws stay finite-support with merged atoms; continuous
    laws become a mixed law with an atom at ``b`` carried by a wrapper kind.
    """
    b = float(b)
    if b < dist.support_infimum:
        raise ValueError(
            f"truncation level {b} lies below the support infimum {dist.support_infimum}"
        )
    if b >= dist.support_supremum():
        return dist
    if dist.kind == "deterministic":
        return EdgeDistribution.deterministic(min(dist.params[0], b))
    if dist.is_finite_support:
        values, probs = dist.atoms()
        return EdgeDistribution.finite_support([min(v, b) for v in values], list(probs))
    if dist.kind == "truncated":
        base, cap = dist.params
        return EdgeDistribution._truncated(base, min(cap, b))
    return EdgeDistribution._truncated(dist, b)


# ---------------------------------------------------------------------------
# lattice boxes


@dataclass(frozen=True)
class LatticeBox:
    """The box [0, n]^d of the nearest-neighbour lattice Z^d.

    Vertices are the integer points with coordinates in 0..n, flattened in
    row-major (C) order over the (n+1)^d grid, so the last coordinate varies
    fastest.  Edges join vertices at l1 distance one and are enumerated
    axis-major: all edges parallel to axis 0 first (ordered by their base
    vertex, the endpoint with the smaller coordinate), then axis 1, and so on.
    """

    dimension: int
    side: int

    def __post_init__(self):
        if self.dimension < 2:
            raise ValueError("dimension must be at least 2")
        if self.side < 1:
            raise ValueError("side must be at least 1")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.side + 1,) * self.dimension

    @property
    def n_vertices(self) -> int:
        return (self.side + 1) ** self.dimension

    @property
    def n_edges(self) -> int:
        d, n = self.dimension, self.side
        return d * n * (n + 1) ** (d - 1)

    def vertex_id(self, coords) -> int:
        c = np.asarray(coords)
        if c.ndim == 1:
            if np.any(c < 0) or np.any(c > self.side):
                raise ValueError(f"vertex {tuple(c)} outside box [0, {self.side}]^{self.dimension}")
            return int(np.ravel_multi_index(tuple(int(v) for v in c), self.shape))
        if np.any(c < 0) or np.any(c > self.side):
            raise ValueError("vertex outside box")
        return np.ravel_multi_index(tuple(c.T), self.shape)

    def vertex_coords(self, vid) -> np.ndarray:
        return np.array(np.unravel_index(vid, self.shape)).T

    def all_vertex_coords(self) -> np.ndarray:
        idx = np.indices(self.shape).reshape(self.dimension, -1).T
        return idx

    def edge_id(self, u, v) -> int:
        """Canonical edge index of the edge joining neighbouring vertices u, v."""
        uu = np.asarray(u, dtype=np.int64)
        vv = np.asarray(v, dtype=np.int64)
        diff = vv - uu
        nz = np.nonzero(diff)[0]
        if len(nz) != 1 or abs(diff[nz[0]]) != 1:
            raise ValueError(f"{tuple(uu)} and {tuple(vv)} are not lattice neighbours")
        axis = int(nz[0])
        base = np.minimum(uu, vv)
        if np.any(base < 0) or np.any(vv > self.side) or np.any(uu > self.side):
            raise ValueError("edge outside box")
        blocks = _edge_layout(self.dimension, self.side)
        offset, strides = blocks[axis]
        return offset + int(np.dot(base, strides))

    def edge_endpoints(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(base coords, axis, tip flat ids) for every edge, canonical order."""
        return _edge_arrays(self.dimension, self.side)[:3]


@lru_cache(maxsize=64)
def _edge_layout(d: int, n: int):
    """Per-axis (offset, strides) of the canonical edge index.

    Edges parallel to axis k are indexed row-major over base-vertex grids of
    shape (n+1, .., n, .., n+1) with the k-th extent reduced to n.
    """
    blocks = []
    offset = 0
    for axis in range(d):
        shape = [n + 1] * d
        shape[axis] = n
        strides = np.ones(d, dtype=np.int64)
        for i in range(d - 2, -1, -1):
            strides[i] = strides[i + 1] * shape[i + 1]
        blocks.append((offset, strides))
        offset += int(np.prod(shape))
    return blocks


@lru_cache(maxsize=32)
def _edge_arrays(d: int, n: int):
    """Vectorised edge tables: base coords, axis, flat endpoint ids."""
    shape_v = (n + 1,) * d
    bases = []
    axes = []
    for axis in range(d):
        shape = [n + 1] * d
        shape[axis] = n
        grid = np.indices(shape).reshape(d, -1).T
        bases.append(grid)
        axes.append(np.full(len(grid), axis, dtype=np.int64))
    base_coords = np.concatenate(bases, axis=0)
    axis_arr = np.concatenate(axes, axis=0)
    tip_coords = base_coords.copy()
    tip_coords[np.arange(len(axis_arr)), axis_arr] += 1
    u_flat = np.ravel_multi_index(tuple(base_coords.T), shape_v)
    v_flat = np.ravel_multi_index(tuple(tip_coords.T), shape_v)
    return base_coords, axis_arr, (u_flat, v_flat)


@lru_cache(maxsize=32)
def _adjacency(d: int, n: int):
    """CSR adjacency over flat vertex ids: (indptr, neighbour ids, edge ids)."""
    _, _, (u_flat, v_flat) = _edge_arrays(d, n)
    n_vert = (n + 1) ** d
    eids = np.arange(len(u_flat), dtype=np.int64)
    src = np.concatenate([u_flat, v_flat])
    dst = np.concatenate([v_flat, u_flat])
    eid2 = np.concatenate([eids, eids])
    order = np.argsort(src, kind="stable")
    src, dst, eid2 = src[order], dst[order], eid2[order]
    indptr = np.zeros(n_vert + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, dst, eid2


# ---------------------------------------------------------------------------
# counter-based per-edge uniforms

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLD = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _avalanche(h: np.ndarray) -> np.ndarray:
    h = (h ^ (h >> np.uint64(30))) * _MIX1
    h = (h ^ (h >> np.uint64(27))) * _MIX2
    return h ^ (h >> np.uint64(31))


def _edge_uniforms(seed: int, axis: np.ndarray, base_coords: np.ndarray) -> np.ndarray:
    """One uniform in [0, 1) per edge, a pure function of (seed, axis, coords)."""
    h = np.full(len(axis), np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
    h = _avalanche(h ^ _GOLD)
    fields = [axis.astype(np.uint64)] + [base_coords[:, i].astype(np.uint64) for i in range(base_coords.shape[1])]
    for f in fields:
        h = _avalanche(h ^ (f * _MIX1 + _GOLD))
    return (h >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)


@dataclass(frozen=True)
class WeightField:
    """Sampled i.i.d. weights on the edges of a box, in canonical edge order."""

    box: LatticeBox
    distribution: EdgeDistribution
    master_seed: int
    weights: np.ndarray = field(repr=False, compare=False)

    def weight_of_edge(self, u, v) -> float:
        return float(self.weights[self.box.edge_id(u, v)])

    def truncated(self, b: float) -> "WeightField":
        """Field of min(weight, b); shares the seed, couples edgewise."""
        return WeightField(
            box=self.box,
            distribution=truncate(self.distribution, b),
            master_seed=self.master_seed,
            weights=np.minimum(self.weights, float(b)),
        )


def sample_weights(dist: EdgeDistribution, box: LatticeBox, seed: int) -> WeightField:
    """Sample the i.i.d. edge-weight field of a box.

    Each edge's uniform is a hash of (seed, axis, base-vertex coordinates),
    so fields are reproducible bit for bit and consistent across nested boxes:
    the edges shared by [0, n]^d and [0, m]^d (m > n) receive the same weights.
    """
    base_coords, axis, _ = _edge_arrays(box.dimension, box.side)
    u = _edge_uniforms(int(seed), axis, base_coords)
    w = dist.sample_from_uniforms(u)
    return WeightField(box=box, distribution=dist, master_seed=int(seed), weights=w)


# ---------------------------------------------------------------------------
# subcriticality of the zero atom

#: Bond percolation thresholds of Z^d.  d = 2 is the exact value 1/2; d = 3
#: has no closed form and the entry is the standard numerical estimate from
#: the percolation literature (Lorenz and Ziff 1998), accurate to ~1e-6.
BOND_PERCOLATION_THRESHOLD: dict[int, Fraction | float] = {
    2: Fraction(1, 2),
    3: 0.2488126,
}


@dataclass(frozen=True)
class AtomCheck:
    atom: Fraction
    threshold: float
    subcritical: bool
    exact_threshold: bool


def subcritical_atom_check(dist: EdgeDistribution, d: int) -> AtomCheck:
    """Check nu({0}) < p_c(d), the subcritical-atom condition.

    Only d in {2, 3} are tabulated; other dimensions raise.
    """
    if d not in BOND_PERCOLATION_THRESHOLD:
        raise ValueError(f"no tabulated bond percolation threshold for d = {d}")
    pc = BOND_PERCOLATION_THRESHOLD[d]
    atom = dist.atom_at_zero()
    exact = isinstance(pc, Fraction)
    sub = (atom < pc) if exact else (float(atom) < pc)
    return AtomCheck(atom=atom, threshold=float(pc), subcritical=bool(sub), exact_threshold=exact)
