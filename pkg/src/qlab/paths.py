"""Interpolated partial-sum paths and continuous path functionals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import Model, PastFixture, e0_increment_series

FUNCTIONAL_KINDS = ("endpoint", "supremum", "infimum", "sup-abs", "time-integral")


@dataclass(frozen=True, eq=False)
class InterpolatedPath:
    """The random polygonal path t -> S_[nt] + (nt - [nt]) f.theta^([nt]+1).

    Grid values are the prefix sums (S_0 = 0); between grid points the
    path follows the defining interpolation formula, which coincides with
    the linear interpolation of the grid values.
    """

    increments: np.ndarray
    n: int

    def __post_init__(self):
        inc = np.asarray(self.increments, dtype=float)
        if inc.size < self.n:
            raise ValueError("need at least n increments")
        grid = np.concatenate([[0.0], np.cumsum(inc[: self.n])])
        object.__setattr__(self, "increments", inc)
        object.__setattr__(self, "grid", grid)

    def evaluate(self, t):
        """Path value at t in [0, 1] (scalar or array)."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > 1):
            raise ValueError("t must lie in [0, 1]")
        if self.n == 0:
            out = np.zeros_like(t)
            return out if out.shape else 0.0
        nt = self.n * t
        idx = np.minimum(np.floor(nt).astype(int), self.n - 1)
        frac = nt - np.floor(nt)
        # at t = 1 the floor is n and the fractional part 0: clamp the
        # index and zero the fraction so the value is exactly S_n
        at_end = np.floor(nt).astype(int) >= self.n
        frac = np.where(at_end, 0.0, frac)
        value = self.grid[idx] + frac * self.increments[idx]
        value = np.where(at_end, self.grid[self.n], value)
        return value if value.shape else float(value)


def build_interpolated_path(increments, n: int) -> InterpolatedPath:
    """Wrap raw increments as the interpolated partial-sum path."""
    if n < 0:
        raise ValueError("n must be >= 0")
    return InterpolatedPath(increments=np.asarray(increments, dtype=float), n=n)


def centered_path(model: Model, fixture: PastFixture,
                  path: InterpolatedPath) -> InterpolatedPath:
    """Subtract the conditional drift given the past from the path.

    The drift of the interpolated path is itself interpolated, so the
    centered path is the interpolation of the conditionally centered
    increments.
    """

    drift = e0_increment_series(model, fixture, path.n)
    return InterpolatedPath(increments=path.increments[: path.n] - drift, n=path.n)


@dataclass(frozen=True)
class PathFunctional:
    """A functional on C[0,1] that is continuous in the sup norm."""

    kind: str

    def __post_init__(self):
        if self.kind not in FUNCTIONAL_KINDS:
            raise ValueError(f"unknown functional {self.kind!r}; "
                             f"choose from {FUNCTIONAL_KINDS}")

    def of_grid(self, grid: np.ndarray) -> np.ndarray:
        """Evaluate on batched polygonal paths given their grid values.

        ``grid`` has shape (reps, n+1) with column 0 equal to 0.  Extremes
        of a polygonal path sit at grid points, and its time integral is
        the trapezoid rule, so every supported functional is exact.
        """

        grid = np.atleast_2d(grid)
        n = grid.shape[1] - 1
        if self.kind == "endpoint":
            return grid[:, -1].copy()
        if self.kind == "supremum":
            return grid.max(axis=1)
        if self.kind == "infimum":
            return grid.min(axis=1)
        if self.kind == "sup-abs":
            return np.abs(grid).max(axis=1)
        return (grid[:, :-1] + grid[:, 1:]).sum(axis=1) / (2.0 * n)

    def of_path(self, path: InterpolatedPath) -> float:
        return float(self.of_grid(path.grid[None, :])[0])
