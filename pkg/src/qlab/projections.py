"""Projection norms, summability diagnostics and the martingale approximation.

The heart of the construction: the influence of the time-0 innovation on
the time-k observable has an exact closed form for both model families,

* linear:  |a_k| * sigma_eps,
* markov:  sum_{x,y} pi(x) P(x,y) [ (P^k g)(y) - (P^{k+1} g)(x) ]^2,

and summability of those norms over k is what licenses the martingale
approximation, its limit increment m, and the long-run variance.  Any
finite computation of an infinite-sum criterion has to declare its
extrapolation rule; ours fits the observed decay (geometric and
polynomial) over the tail of the computed range and extrapolates the
better fit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .markov_ops import poisson_solve
from .models import (LinearModel, Model, PastFixture, Realization,
                     _check_fixture)

SUMMABLE = "summable"
DIVERGING = "diverging"
INCONCLUSIVE = "inconclusive"

# fitted tail must be this small, relative to the partial sum, to call a
# truncated series summable
TAIL_FRACTION = 1e-6


class HannanDivergesError(ValueError):
    """Raised when an infinite-order quantity is requested without summability."""

    def __init__(self, verdict: str, report):
        self.verdict = verdict
        self.report = report
        super().__init__(
            f"projection norms are not summable (verdict: {verdict}); "
            "the r = infinity martingale approximation is undefined")


@dataclass(frozen=True, eq=False)
class ProjectionSeries:
    """Norms of the time-0 projections of the shifted observable, k = 0..K."""

    norms: np.ndarray
    bias: np.ndarray
    K: int

    def __post_init__(self):
        if np.any(self.norms < 0) or np.any(self.bias < 0):
            raise ValueError("norms and bias must be nonnegative")


def projection_norms(model: Model, K: int) -> ProjectionSeries:
    """Exact closed-form norms of P_0(f . theta^k) for k = 0..K."""
    if K < 0:
        raise ValueError("K must be >= 0")
    if isinstance(model, LinearModel):
        norms = np.zeros(K + 1)
        bias = np.zeros(K + 1)
        J = model.horizon
        upto = min(K, J)
        norms[: upto + 1] = np.abs(model.coeffs[: upto + 1]) * model.sigma_eps
        if K > J:
            bias[J + 1 :] = model.tail_bound * model.sigma_eps
        return ProjectionSeries(norms=norms, bias=bias, K=K)
    P, pi, g = model.transition, model.stationary, model.observable
    norms = np.zeros(K + 1)
    v = g - float(pi @ g)
    for k in range(K + 1):
        # pi(P^k g) = pi(g) = 0 exactly; re-centering each iterate keeps the
        # decay from stalling at the rounding floor
        v_next = P @ v
        v_next -= float(pi @ v_next)
        diff = v[None, :] - v_next[:, None]  # (P^k g)(y) - (P^{k+1} g)(x)
        norms[k] = np.sqrt(np.sum(pi[:, None] * P * diff**2))
        v = v_next
    return ProjectionSeries(norms=norms, bias=np.zeros(K + 1), K=K)


@dataclass
class SummabilityReport:
    partial_sums: np.ndarray
    tail_fit: str            # "geometric" | "polynomial" | "none"
    verdict: str             # "summable" | "diverging" | "inconclusive"
    fitted_tail: float
    fit_details: dict


def _fit_tail(indices: np.ndarray, values: np.ndarray, K: int) -> dict:
    """Fit log values against k (geometric) and log k (polynomial)."""
    logs = np.log(values)
    geo = np.polyfit(indices, logs, 1)
    geo_sse = float(np.sum((np.polyval(geo, indices) - logs) ** 2))
    positive = indices >= 1
    out = {"geo_slope": float(geo[0]), "geo_intercept": float(geo[1]),
           "geo_sse": geo_sse, "poly_exponent": None, "poly_intercept": None,
           "poly_sse": np.inf}
    if positive.sum() >= 2:
        lk = np.log(indices[positive])
        poly = np.polyfit(lk, logs[positive], 1)
        out["poly_exponent"] = float(poly[0])
        out["poly_intercept"] = float(poly[1])
        out["poly_sse"] = float(np.sum((np.polyval(poly, lk) - logs[positive]) ** 2))
    # extrapolated tails beyond K
    q = math.exp(out["geo_slope"])
    out["geo_tail"] = (math.exp(out["geo_intercept"] + out["geo_slope"] * (K + 1))
                       / (1.0 - q) if q < 1 else math.inf)
    p = out["poly_exponent"]
    if p is not None and p < -1:
        out["poly_tail"] = math.exp(out["poly_intercept"]) * (K + 1) ** (p + 1) / (-1 - p)
    else:
        out["poly_tail"] = math.inf
    return out


def _summability(values: np.ndarray, bias: np.ndarray) -> SummabilityReport:
    partial = np.cumsum(values)
    K = values.size - 1
    total = float(partial[-1])
    nonzero = np.flatnonzero(values > 0)
    exact_support = (nonzero.size == 0
                     or (nonzero[-1] < K and np.all(bias[nonzero[-1] + 1 :] == 0)))
    if exact_support:
        return SummabilityReport(partial_sums=partial, tail_fit="none",
                                 verdict=SUMMABLE, fitted_tail=0.0, fit_details={})
    # entries at the rounding floor cannot carry decay information; a tail
    # that is entirely below the floor (and declared bias free) is summable
    # outright, with the raw remainder reported as the tail
    floor = float(values.max()) * 1e-14
    live = np.flatnonzero(values > floor)
    if (live.size and live[-1] < K and np.all(values[live[-1] + 1 :] <= floor)
            and np.all(bias[live[-1] + 1 :] == 0)):
        return SummabilityReport(partial_sums=partial, tail_fit="none",
                                 verdict=SUMMABLE,
                                 fitted_tail=float(values[live[-1] + 1 :].sum()),
                                 fit_details={"floor": floor})
    window = live[live.size // 2 :]
    if window.size < 3:
        return SummabilityReport(partial_sums=partial, tail_fit="none",
                                 verdict=INCONCLUSIVE, fitted_tail=math.inf,
                                 fit_details={})
    fit = _fit_tail(window, values[window], K)
    geometric_wins = fit["geo_sse"] <= fit["poly_sse"]
    tail_fit = "geometric" if geometric_wins else "polynomial"
    fitted_tail = fit["geo_tail"] if geometric_wins else fit["poly_tail"]
    if fitted_tail < TAIL_FRACTION * total:
        verdict = SUMMABLE
    elif geometric_wins and fit["geo_slope"] >= 0:
        verdict = DIVERGING
    elif not geometric_wins and fit["poly_exponent"] >= -1:
        verdict = DIVERGING
    else:
        verdict = INCONCLUSIVE
    return SummabilityReport(partial_sums=partial, tail_fit=tail_fit,
                             verdict=verdict, fitted_tail=float(fitted_tail),
                             fit_details=fit)


def hannan_sum(series: ProjectionSeries) -> SummabilityReport:
    """Partial sums of the projection norms with a summability verdict."""
    return _summability(series.norms, series.bias)


def _conditional_norm_E0(model: Model, n_max: int) -> np.ndarray:
    """Exact |E0(f . theta^n)|_2 for n = 1..n_max."""
    if isinstance(model, LinearModel):
        sq = model.coeffs**2
        suffix = np.concatenate([np.cumsum(sq[::-1])[::-1], [0.0]])
        out = np.zeros(n_max)
        upto = min(n_max, model.horizon)
        out[:upto] = model.sigma_eps * np.sqrt(suffix[1 : upto + 1])
        return out
    P, pi, g = model.transition, model.stationary, model.observable
    out = np.zeros(n_max)
    v = g - float(pi @ g)
    for n in range(1, n_max + 1):
        v = P @ v
        v -= float(pi @ v)
        out[n - 1] = np.sqrt(float(pi @ v**2))
    return out


@dataclass
class MWReport:
    terms: np.ndarray
    report: SummabilityReport

    @property
    def partial_sums(self) -> np.ndarray:
        return self.report.partial_sums

    @property
    def verdict(self) -> str:
        return self.report.verdict


def mw_criterion(model: Model, N: int) -> MWReport:
    """Partial sums of |E0(f . theta^n)|_2 / sqrt(n) with a verdict."""
    if N < 1:
        raise ValueError("N must be >= 1")
    ns = np.arange(1, N + 1)
    terms = _conditional_norm_E0(model, N) / np.sqrt(ns)
    if isinstance(model, LinearModel):
        bias = model.tail_bound * model.sigma_eps / np.sqrt(ns)
    else:
        bias = np.zeros(N)
    return MWReport(terms=terms, report=_summability(terms, bias))


@dataclass(frozen=True, eq=False)
class MartingaleApprox:
    """Closed-form representation of the order-r martingale increment.

    Linear models: the increment is ``c * eps_0`` with c the partial
    coefficient sum.  Markov models: the increment is
    ``g_hat(x_0) - (P g_hat)(x_-1)`` with g_hat the partial sum of P^k g
    (the solution of the Poisson equation at r = infinity).
    """

    r: float
    kind: str
    c: Optional[float] = None
    g_hat: Optional[np.ndarray] = None
    p_g_hat: Optional[np.ndarray] = None


def _default_hannan_horizon(model: Model) -> int:
    # a few entries past the coefficient range let exactly finite support
    # show itself as bias-free trailing zeros
    return model.horizon + 8 if isinstance(model, LinearModel) else 128


def martingale_increment(model: Model, r: float = math.inf,
                         hannan_horizon: Optional[int] = None) -> MartingaleApprox:
    """The order-r martingale increment, r a nonnegative integer or inf."""
    if r != math.inf:
        r = int(r)
        if r < 0:
            raise ValueError("r must be >= 0 or infinity")
    if r == math.inf:
        series = projection_norms(model, hannan_horizon or _default_hannan_horizon(model))
        report = hannan_sum(series)
        if report.verdict != SUMMABLE:
            raise HannanDivergesError(report.verdict, report)
    if isinstance(model, LinearModel):
        upto = model.horizon if r == math.inf else min(int(r), model.horizon)
        return MartingaleApprox(r=r, kind="linear",
                                c=float(np.sum(model.coeffs[: upto + 1])))
    P, g = model.transition, model.observable
    if r == math.inf:
        g_hat = poisson_solve(P, g)
    else:
        g_hat = g.copy()
        v = g.copy()
        for _ in range(int(r)):
            v = P @ v
            g_hat += v
    return MartingaleApprox(r=r, kind="markov", g_hat=g_hat, p_g_hat=P @ g_hat)


def evaluate_martingale(model: Model, approx: MartingaleApprox,
                        fixture: PastFixture, realization: Realization,
                        n: int) -> np.ndarray:
    """Partial sums M_1..M_n of the approximating martingale, per path.

    The realization must be the one behind the conditional paths being
    compared, so that the difference to the centered sums is a pathwise
    quantity and not a fresh simulation.
    """

    _check_fixture(model, fixture)
    if n < 0 or n > realization.n:
        raise ValueError(f"need 0 <= n <= path length {realization.n}, got {n}")
    if isinstance(model, LinearModel):
        if approx.kind != "linear" or realization.fresh is None:
            raise ValueError("model, approximation and realization kinds differ")
        return approx.c * np.cumsum(realization.fresh[:, :n], axis=1)
    if approx.kind != "markov" or realization.states is None:
        raise ValueError("model, approximation and realization kinds differ")
    states = realization.states
    increments = approx.g_hat[states[:, 1 : n + 1]] - approx.p_g_hat[states[:, :n]]
    return np.cumsum(increments, axis=1)


def _pair_variance(P: np.ndarray, pi: np.ndarray, u: np.ndarray) -> float:
    """E over pi(x)P(x,y) of [u(y) - (Pu)(x)]^2, simplified exactly."""
    pu = P @ u
    return float(pi @ u**2 - pi @ pu**2)


def sigma_squared(model: Model, hannan_horizon: Optional[int] = None) -> float:
    """The limit of E(S_n^2)/n, equal to the squared norm of m."""
    approx = martingale_increment(model, math.inf, hannan_horizon)
    if isinstance(model, LinearModel):
        return approx.c**2 * model.innovation.variance
    return _pair_variance(model.transition, model.stationary, approx.g_hat)


def approximation_gap(model: Model, r: float,
                      hannan_horizon: Optional[int] = None) -> float:
    """Exact |m - m^(r)|_2, the L2 distance to the limit increment."""
    full = martingale_increment(model, math.inf, hannan_horizon)
    part = martingale_increment(model, r, hannan_horizon)
    if isinstance(model, LinearModel):
        return abs(full.c - part.c) * model.sigma_eps
    delta = full.g_hat - part.g_hat
    return float(np.sqrt(max(_pair_variance(model.transition, model.stationary, delta), 0.0)))
