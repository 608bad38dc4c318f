"""Piecewise-linear approximations of softplus(z) = log(1 + e^z)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model import softplus

DEFAULT_SEGMENT_CAP = 10_000
DEFAULT_EPSILON = 1e-3


class SegmentCapError(ValueError):
    pass


@dataclass(frozen=True)
class PiecewiseApprox:
    """g(z) = slope_j * z + intercept_j on the j-th interval.

    Interval j is [breakpoints[j-1], breakpoints[j]) with the outer two
    intervals unbounded, so there is one more segment than breakpoints.
    """

    breakpoints: np.ndarray
    slopes: np.ndarray
    intercepts: np.ndarray
    max_error: float
    certified_range: tuple[float, float]

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        s = np.asarray(self.slopes, dtype=float)
        t = np.asarray(self.intercepts, dtype=float)
        if s.shape != t.shape or s.shape[0] != bp.shape[0] + 1:
            raise ValueError("need exactly one more segment than breakpoints")
        if np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly ascending")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "slopes", s)
        object.__setattr__(self, "intercepts", t)

    @property
    def n_segments(self) -> int:
        return self.slopes.shape[0]

    @property
    def segments(self) -> list[tuple[float, float]]:
        return list(zip(self.slopes.tolist(), self.intercepts.tolist()))

    def segment_index(self, z):
        return np.searchsorted(self.breakpoints, z, side="right")

    def segment_bounds(self, j: int) -> tuple[float, float]:
        lo = -np.inf if j == 0 else float(self.breakpoints[j - 1])
        hi = np.inf if j == self.n_segments - 1 else float(self.breakpoints[j])
        return lo, hi

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        j = self.segment_index(z)
        return self.slopes[j] * z + self.intercepts[j]

    def jumps(self) -> np.ndarray:
        """Discontinuity (right minus left value) at each breakpoint."""
        bp = self.breakpoints
        left = self.slopes[:-1] * bp + self.intercepts[:-1]
        right = self.slopes[1:] * bp + self.intercepts[1:]
        return right - left

    def range_on(self, lo: float, hi: float) -> tuple[float, float]:
        """Min and max of g over [lo, hi], counting both sides of any jump."""
        vals = []
        for j in range(self.n_segments):
            a, b = self.segment_bounds(j)
            a, b = max(a, lo), min(b, hi)
            if a > b:
                continue
            vals.append(self.slopes[j] * a + self.intercepts[j])
            vals.append(self.slopes[j] * b + self.intercepts[j])
        return float(min(vals)), float(max(vals))


def grid_error(pwl: PiecewiseApprox, lo: float, hi: float, n_points: int = 100_001) -> float:
    """Sup |g - softplus| over a uniform grid plus both sides of every breakpoint."""
    z = np.linspace(lo, hi, n_points)
    inside = pwl.breakpoints[(pwl.breakpoints >= lo) & (pwl.breakpoints <= hi)]
    left = np.nextafter(inside, -np.inf)
    z = np.concatenate([z, inside, left[left >= lo]])
    return float(np.max(np.abs(pwl(z) - softplus(z))))


_TABLE_BREAKPOINTS = (-3.257, -0.998, 0.602, 2.584)
_TABLE_SLOPES = (
    0.0,
    2.0**-4 + 2.0**-5 + 2.0**-6 + 2.0**-8,
    2.0**-2 + 2.0**-3 + 2.0**-4 + 2.0**-7 + 2.0**-8,
    2.0**-1 + 2.0**-2 + 2.0**-4 + 2.0**-7,
    1.0,
)
_TABLE_INTERCEPTS = (0.0, 0.379, 0.715, 0.492, 0.0)


def paper_pwl(certify_range: tuple[float, float] = (-8.0, 8.0)) -> PiecewiseApprox:
    """The fixed five-segment table with dyadic slopes.

    Its error is not small: about 0.022 at z = 0 and larger next to the
    breakpoints.  ``max_error`` records the grid-measured value on
    ``certify_range``.
    """
    probe = PiecewiseApprox(
        np.array(_TABLE_BREAKPOINTS),
        np.array(_TABLE_SLOPES),
        np.array(_TABLE_INTERCEPTS),
        0.0,
        certify_range,
    )
    err = grid_error(probe, *certify_range)
    return PiecewiseApprox(probe.breakpoints, probe.slopes, probe.intercepts, err, certify_range)


def secant_error(a: float, b: float) -> float:
    """Exact max of (secant - softplus) on [a, b].

    softplus is convex with derivative sigmoid, so the gap peaks where
    sigmoid(z) equals the secant slope.
    """
    fa, fb = softplus(a), softplus(b)
    s = (fb - fa) / (b - a)
    if not 0.0 < s < 1.0:
        # slope saturated in float: the chord and the curve coincide to rounding
        return float(max(0.0, abs(fb - fa - (b - a) * np.clip(s, 0, 1))))
    zs = np.log(s) - np.log1p(-s)
    zs = min(max(zs, a), b)
    return float(fa + s * (zs - a) - softplus(zs))


def adaptive_pwl(
    epsilon: float = DEFAULT_EPSILON,
    z_range: tuple[float, float] = (-8.0, 8.0),
    max_segments: int = DEFAULT_SEGMENT_CAP,
) -> PiecewiseApprox:
    """Chord approximation of softplus on ``z_range`` with error at most ``epsilon``.

    Segments are laid left to right; each one is stretched as far as the
    exact chord error allows, found by bisection on its right end.  The first
    and last chords extend outward as the two unbounded segments.  Chords lie
    above the convex curve, so the result is continuous, convex and never
    below softplus on the range.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    lo, hi = map(float, z_range)
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo >= hi:
        raise ValueError(f"z_range must be a finite interval with lo < hi, got {z_range}")

    knots = [lo]
    a = lo
    while a < hi:
        if secant_error(a, hi) <= epsilon:
            b = hi
        else:
            left, right = a, hi
            for _ in range(200):
                mid = 0.5 * (left + right)
                if secant_error(a, mid) <= epsilon:
                    left = mid
                else:
                    right = mid
                if right - left <= 1e-12 * max(1.0, abs(a)):
                    break
            b = left
            if b <= a:
                raise SegmentCapError(f"epsilon={epsilon} below floating resolution near z={a}")
        knots.append(b)
        a = b
        if len(knots) - 1 > max_segments:
            raise SegmentCapError(
                f"epsilon={epsilon} on [{lo}, {hi}] needs more than {max_segments} segments"
            )

    knots = np.array(knots)
    f = softplus(knots)
    slopes = np.diff(f) / np.diff(knots)
    intercepts = f[:-1] - slopes * knots[:-1]
    err = max(secant_error(knots[k], knots[k + 1]) for k in range(len(knots) - 1))
    return PiecewiseApprox(knots[1:-1], slopes, intercepts, float(err), (lo, hi))
