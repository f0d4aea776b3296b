"""Exact segment geometry over rational coordinates.

Helpers for intersecting and cutting piecewise-linear paths.  Floats are
binary rationals, so converting breakpoints to Fractions is lossless and all
incidence decisions here are exact.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

FracVec = tuple[Fraction, ...]


def fvec(p) -> FracVec:
    return tuple(Fraction(float(c)) for c in p)


def fsub(a: FracVec, b: FracVec) -> FracVec:
    return tuple(x - y for x, y in zip(a, b))


def flerp(a: FracVec, b: FracVec, t: Fraction) -> FracVec:
    return tuple(x + t * (y - x) for x, y in zip(a, b))


def _parallel(u: FracVec, v: FracVec) -> bool:
    d = len(u)
    for i in range(d):
        for j in range(i + 1, d):
            if u[i] * v[j] - u[j] * v[i] != 0:
                return False
    return True


def _param_on_line(p: FracVec, direction: FracVec, z: FracVec) -> Fraction | None:
    """t with z = p + t direction, assuming z is on the line; None if not."""
    pivot = next((i for i, c in enumerate(direction) if c != 0), None)
    if pivot is None:
        return Fraction(0) if z == p else None
    t = (z[pivot] - p[pivot]) / direction[pivot]
    for i, c in enumerate(direction):
        if p[i] + t * c != z[i]:
            return None
    return t


def segment_intersection(p: FracVec, q: FracVec, r: FracVec, s: FracVec):
    """Intersection of segments [p,q] and [r,s] in R^d.

    Returns ``None``, ``("point", t, u)`` with parameters on each segment, or
    ``("overlap", (t0, t1), (u0, u1))`` for a positive-length common piece
    (t parameters on [p,q] increasing, u matching them on [r,s]).
    """
    d1 = fsub(q, p)
    d2 = fsub(s, r)
    if all(c == 0 for c in d1) or all(c == 0 for c in d2):
        raise ValueError("degenerate segment")
    if _parallel(d1, d2):
        tr = _param_on_line(p, d1, r)
        if tr is None:
            return None
        ts = _param_on_line(p, d1, s)
        lo_t, hi_t = min(tr, ts), max(tr, ts)
        a = max(Fraction(0), lo_t)
        b = min(Fraction(1), hi_t)
        if a > b:
            return None

        def u_of(t: Fraction) -> Fraction:
            return (t - tr) / (ts - tr)

        if a == b:
            return ("point", a, u_of(a))
        return ("overlap", (a, b), (u_of(a), u_of(b)))
    # non-parallel: solve p + t d1 = r + u d2 on an independent axis pair
    rp = fsub(r, p)
    d = len(p)
    for i in range(d):
        for j in range(i + 1, d):
            det = d1[i] * (-d2[j]) - (-d2[i]) * d1[j]
            if det == 0:
                continue
            t = (rp[i] * (-d2[j]) - (-d2[i]) * rp[j]) / det
            u = (d1[i] * rp[j] - rp[i] * d1[j]) / det
            for k in range(d):
                if p[k] + t * d1[k] != r[k] + u * d2[k]:
                    return None
            if 0 <= t <= 1 and 0 <= u <= 1:
                return ("point", t, u)
            return None
    return None


def point_on_segment(z: FracVec, p: FracVec, q: FracVec) -> Fraction | None:
    """Parameter t in [0, 1] with z = p + t (q - p), or None."""
    d1 = fsub(q, p)
    t = _param_on_line(p, d1, z)
    if t is None or not (0 <= t <= 1):
        return None
    return t


def merge_intervals(intervals: list[tuple[Fraction, Fraction]]) -> list[tuple[Fraction, Fraction]]:
    """Union of closed intervals (degenerate ones allowed)."""
    if not intervals:
        return []
    xs = sorted(intervals)
    out = [list(xs[0])]
    for a, b in xs[1:]:
        if a <= out[-1][1]:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return [(a, b) for a, b in out]


def complement_segments(
    total: tuple[Fraction, Fraction],
    removed: list[tuple[Fraction, Fraction]],
) -> list[tuple[Fraction, Fraction]]:
    """Maximal closed positive-length segments of ``total`` whose interiors
    avoid the removed set.  A degenerate removed interval (an isolated touch
    point) splits the segment but stays in the closure of both sides."""
    lo, hi = total
    merged = merge_intervals([(max(lo, a), min(hi, b)) for a, b in removed
                              if max(lo, a) <= min(hi, b)])
    out = []
    cur = lo
    for a, b in merged:
        if a > cur:
            # the closed piece up to the obstacle; an isolated touch point
            # (a == b) stays in the closure of both neighbours
            out.append((cur, a))
        cur = max(cur, b)
    if hi > cur:
        out.append((cur, hi))
    return [(a, b) for a, b in out if b > a]
