"""Empirical CDFs, Kolmogorov-Smirnov tests and reference laws.

p-values use the asymptotic Kolmogorov distribution (series truncated
once terms fall below 1e-10).  That is accurate for the sample sizes the
experiments use (M >= 1000) and a documented bias source below M = 100.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import ndtr, ndtri

_SERIES_TOL = 1e-10


def normal_cdf(z):
    """Standard normal CDF, accurate to machine precision."""
    return ndtr(np.asarray(z, dtype=float))


def normal_quantile(p):
    return ndtri(np.asarray(p, dtype=float))


def brownian_sup_cdf(a, sigma: float):
    """P(sup_{t<=1} sigma W_t <= a), by the reflection principle."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    a = np.asarray(a, dtype=float)
    out = np.where(a < 0, 0.0, 2.0 * normal_cdf(a / sigma) - 1.0)
    return out if out.shape else float(out)


def kolmogorov_sf(x: float) -> float:
    """Survival function 2 sum_j (-1)^(j-1) exp(-2 j^2 x^2) of the KS limit."""
    if x <= 0:
        return 1.0
    total = 0.0
    sign = 1.0
    for j in range(1, 1000):
        term = np.exp(-2.0 * j * j * x * x)
        total += sign * term
        if term < _SERIES_TOL:
            break
        sign = -sign
    return float(min(1.0, max(0.0, 2.0 * total)))


@dataclass(frozen=True, eq=False)
class EmpiricalSample:
    """A sorted sample with its empirical CDF."""

    values: np.ndarray

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float))
        if v.size < 1:
            raise ValueError("sample must be nonempty")
        object.__setattr__(self, "values", v)

    @property
    def size(self) -> int:
        return self.values.size

    def ecdf(self, t):
        """Right-continuous empirical CDF evaluated at t."""
        t = np.asarray(t, dtype=float)
        out = np.searchsorted(self.values, t, side="right") / self.size
        return out if out.shape else float(out)


@dataclass(frozen=True)
class ReferenceCDF:
    """A reference law for one-sample comparisons."""

    kind: str
    cdf: Callable
    params: tuple = ()

    def __call__(self, t):
        return self.cdf(t)


def normal_reference(variance: float) -> ReferenceCDF:
    if variance <= 0:
        raise ValueError("variance must be positive")
    sd = float(np.sqrt(variance))
    return ReferenceCDF("normal", lambda t: normal_cdf(np.asarray(t) / sd),
                        params=(variance,))


def brownian_sup_reference(sigma: float) -> ReferenceCDF:
    return ReferenceCDF("brownian-sup", lambda t: brownian_sup_cdf(t, sigma),
                        params=(sigma,))


def ks_one_sample(sample: EmpiricalSample, ref: ReferenceCDF) -> tuple[float, float]:
    """KS distance to a reference CDF with its asymptotic p-value."""
    if sample.size < 10:
        raise ValueError("one-sample KS requires M >= 10")
    m = sample.size
    f = np.asarray(ref(sample.values), dtype=float)
    upper = np.arange(1, m + 1) / m - f
    lower = f - np.arange(0, m) / m
    d = float(max(upper.max(), lower.max()))
    return d, kolmogorov_sf(d * np.sqrt(m))


def ks_two_sample(a: EmpiricalSample, b: EmpiricalSample) -> tuple[float, float]:
    """Two-sample KS distance with the asymptotic p-value."""
    if a.size < 10 or b.size < 10:
        raise ValueError("two-sample KS requires M >= 10 on both sides")
    pooled = np.concatenate([a.values, b.values])
    fa = np.searchsorted(a.values, pooled, side="right") / a.size
    fb = np.searchsorted(b.values, pooled, side="right") / b.size
    d = float(np.max(np.abs(fa - fb)))
    effective = a.size * b.size / (a.size + b.size)
    return d, kolmogorov_sf(d * np.sqrt(effective))
