"""Euclidean projection onto the bounded simplex {lo ≤ v ≤ hi, Σv ≤ budget}.

The budget-active case reduces to a scalar equation Σ clamp(v − λ, lo, hi)
= budget, piecewise linear in λ with 2E breakpoints.  Sorting the
breakpoints and sweeping with a running slope solves it in O(E log E).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SimplexBounds:
    """Feasible set parameters: elementwise box [v_lo, v_hi] and total budget v_bar."""

    v_lo: float
    v_hi: float
    v_bar: float

    def validate(self, n: int) -> None:
        if not 0.0 < self.v_lo < self.v_hi:
            raise ValueError(f"need 0 < v_lo < v_hi, got [{self.v_lo}, {self.v_hi}]")
        if not n * self.v_lo <= self.v_bar <= n * self.v_hi:
            raise ValueError(
                f"budget {self.v_bar} infeasible for {n} elements in [{self.v_lo}, {self.v_hi}]"
            )


def project_box(v: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Elementwise clamp to [lo, hi]."""
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    return np.clip(v, lo, hi)


def _bisect_shift(v: np.ndarray, bounds: SimplexBounds) -> float:
    # robust fallback: Σ clamp(v − λ) − v_bar is monotone nonincreasing in λ
    lo, hi = 0.0, float(v.max() - bounds.v_lo)
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if np.clip(v - mid, bounds.v_lo, bounds.v_hi).sum() > bounds.v_bar:
            lo = mid
        else:
            hi = mid
    return hi


def project_simplex(v: np.ndarray, bounds: SimplexBounds) -> np.ndarray:
    """Unique minimizer of ½‖x − v‖² over the bounded simplex.

    Early-exits with the box projection when the budget is slack; otherwise
    finds λ > 0 with Σ clamp(v − λ, lo, hi) = budget by the sorted-breakpoint
    sweep and returns clamp(v − λ, lo, hi).
    """
    bounds.validate(v.size)
    lo, hi, budget = bounds.v_lo, bounds.v_hi, bounds.v_bar
    boxed = np.clip(v, lo, hi)
    if boxed.sum() <= budget:
        return boxed

    # breakpoints where an element enters the linear regime (v_e − hi) or
    # leaves it at the lower bound (v_e − lo); slope is −(count in regime)
    levels = np.concatenate([v - hi, v - lo])
    slope_steps = np.concatenate([-np.ones(v.size), np.ones(v.size)])
    order = np.argsort(levels, kind="stable")
    levels = levels[order]
    slopes = np.cumsum(slope_steps[order])  # slope to the right of each breakpoint

    # value of Σ clamp(v − λ) at each breakpoint, starting from E·hi
    gaps = np.diff(levels)
    values = v.size * hi + np.concatenate([[0.0], np.cumsum(slopes[:-1] * gaps)])

    # first breakpoint at or below the budget ends the crossing segment; it
    # exists (values[-1] = E·lo ≤ budget) and cannot be index 0 (values[0] =
    # E·hi > budget), and ties sort stably so the segment has nonzero length
    lam = None
    below = np.nonzero(values <= budget)[0]
    if below.size > 0 and below[0] > 0:
        i = int(below[0])
        s = slopes[i - 1]
        if s < 0:
            lam = levels[i - 1] + (values[i - 1] - budget) / (-s)
    if lam is None or lam < 0:  # cumsum rounding at a degenerate budget: fall back
        lam = _bisect_shift(v, bounds)

    out = np.clip(v - lam, lo, hi)
    if abs(out.sum() - budget) > 1e-7:  # degenerate float ordering: fall back
        out = np.clip(v - _bisect_shift(v, bounds), lo, hi)
    return out
