"""Exact finite-state operator machinery for the one-step transition Q.

On a finite ergodic chain the conditional-expectation operator of the
next step is just the transition matrix, so positivity, the L1/Linf
contraction property, the Hopf maximal inequality, the weak-L2 tail
functional and the Markov-property identity can all be checked in exact
matrix arithmetic rather than statistically.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .models import MarkovFunctionalModel

_ATOL = 1e-12


@dataclass(frozen=True, eq=False)
class TransitionOperator:
    """Row-stochastic matrix acting on state functions, with reference pi."""

    matrix: np.ndarray
    pi: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.matrix, dtype=float)
        pi = np.asarray(self.pi, dtype=float)
        if np.max(np.abs(Q.sum(axis=1) - 1.0)) > _ATOL:
            raise ValueError("operator rows must sum to 1 within 1e-12")
        if np.any(Q < 0):
            raise ValueError("operator must be positive (entrywise nonnegative)")
        if np.max(np.abs(pi @ Q - pi)) > _ATOL:
            raise ValueError("reference measure must be invariant within 1e-12")
        object.__setattr__(self, "matrix", Q)
        object.__setattr__(self, "pi", pi)

    def apply(self, h: np.ndarray) -> np.ndarray:
        return self.matrix @ h

    def l1_norm(self, h: np.ndarray) -> float:
        return float(self.pi @ np.abs(h))

    @property
    def n_states(self) -> int:
        return self.matrix.shape[0]


def q_operator_from_model(model: MarkovFunctionalModel) -> TransitionOperator:
    """The one-step conditional-expectation operator of the model's chain."""
    return TransitionOperator(model.transition, model.stationary)


def dual_operator(op: TransitionOperator) -> np.ndarray:
    """The pi-adjoint matrix T with <Qh, k>_pi = <h, Tk>_pi."""
    pi = op.pi
    return (op.matrix.T * pi[None, :]) / pi[:, None]


@dataclass
class ContractionReport:
    ok: bool
    violations: list = field(default_factory=list)
    checked: int = 0


def verify_dunford_schwartz(op: TransitionOperator, test_functions) -> ContractionReport:
    """Check that both the L1(pi) and the sup norm never increase under Q."""
    funcs = [np.asarray(h, dtype=float) for h in test_functions]
    if not funcs:
        raise ValueError("need at least one test function")
    report = ContractionReport(ok=True)
    for idx, h in enumerate(funcs):
        qh = op.apply(h)
        l1_before, l1_after = op.l1_norm(h), op.l1_norm(qh)
        sup_before = float(np.max(np.abs(h)))
        sup_after = float(np.max(np.abs(qh)))
        report.checked += 1
        if l1_after > l1_before + _ATOL or sup_after > sup_before + _ATOL:
            report.ok = False
            report.violations.append({
                "index": idx,
                "l1_before": l1_before, "l1_after": l1_after,
                "sup_before": sup_before, "sup_after": sup_after,
            })
    return report


@dataclass(frozen=True, eq=False)
class MaximalFunction:
    """Truncated maximal function of the Cesaro averages of Q^i |h|.

    Truncation at N is conservative: the truncated function is dominated
    by the full supremum, so an inequality verified against it is valid
    evidence but never a certificate of more than it states.
    """

    values: np.ndarray
    base: np.ndarray
    truncation: int


def maximal_function(op: TransitionOperator, h, N: int) -> MaximalFunction:
    """Compute max_{1<=n<=N} (1/n) sum_{i<n} Q^i |h| by iterated application."""
    if N < 1:
        raise ValueError("N must be >= 1")
    h = np.asarray(h, dtype=float)
    power = np.abs(h)
    running = power.copy()
    best = running.copy()
    for n in range(2, N + 1):
        power = op.apply(power)
        running += power
        np.maximum(best, running / n, out=best)
    return MaximalFunction(values=best, base=h, truncation=N)


@dataclass
class HopfReport:
    ok: bool
    l1_norm: float
    worst_level: float
    worst_product: float
    levels: np.ndarray


def hopf_check(op: TransitionOperator, maximal: MaximalFunction) -> HopfReport:
    """Evaluate x * pi(h* > x) <= |h|_1 at every attained level of h*."""
    l1 = op.l1_norm(maximal.base)
    levels = np.unique(maximal.values)
    products = np.array(
        [lvl * float(op.pi[maximal.values > lvl].sum()) for lvl in levels])
    worst = int(np.argmax(products)) if products.size else 0
    ok = bool(np.all(products <= l1 + _ATOL))
    return HopfReport(ok=ok, l1_norm=l1, worst_level=float(levels[worst]),
                      worst_product=float(products[worst]), levels=levels)


def weak_l2_tail(values, weights=None) -> float:
    """sup_lambda lambda^2 mu(|h| >= lambda) over the attained levels.

    ``values`` is either a state function (with ``weights`` = pi) or a
    Monte Carlo sample (uniform weights).  The supremum over all lambda
    is attained at one of the levels because the tail measure is constant
    between them.
    """

    v = np.abs(np.asarray(values, dtype=float))
    if v.size == 0:
        raise ValueError("need a nonempty input")
    if weights is None:
        w = np.full(v.size, 1.0 / v.size)
    else:
        w = np.asarray(weights, dtype=float)
    order = np.argsort(v)
    v_sorted = v[order]
    # tail weight at level v_sorted[i] is the total weight of entries >= it
    tail = np.cumsum(w[order][::-1])[::-1]
    return float(np.max(v_sorted**2 * tail))


def _path_weights(model: MarkovFunctionalModel, length: int):
    """All state paths of a given length with their stationary weights."""
    S = model.n_states
    paths = np.array(list(itertools.product(range(S), repeat=length)), dtype=np.intp)
    weights = model.stationary[paths[:, 0]].copy()
    for i in range(1, length):
        weights *= model.transition[paths[:, i - 1], paths[:, i]]
    return paths, weights


@dataclass
class MarkovPropertyReport:
    max_discrepancy: float
    per_n: dict


def verify_markov_property(model: MarkovFunctionalModel, n_max: int) -> MarkovPropertyReport:
    """Brute-force check of the defining identity of the chain.

    For every n <= n_max and every tuple of single-state indicators
    (phi_0, ..., phi_n), the expectation of the product phi_0(W_0) ...
    phi_n(W_n) must equal the expectation with phi_n(W_n) replaced by
    (Q phi_n)(W_{n-1}).  Indicators span all bounded functions by
    linearity, so this finite check covers the general statement.  Both
    sides are computed by exact path enumeration.
    """

    if n_max > 4:
        raise ValueError("n_max must be <= 4 (path enumeration)")
    S = model.n_states
    per_n = {}
    worst = 0.0
    for n in range(1, n_max + 1):
        paths_full, w_full = _path_weights(model, n + 1)
        paths_head, w_head = _path_weights(model, n)
        worst_n = 0.0
        for combo in itertools.product(range(S), repeat=n + 1):
            lhs = float(w_full[np.all(paths_full == combo, axis=1)].sum())
            head_mask = np.all(paths_head == combo[:n], axis=1)
            q_phi = model.transition[:, combo[n]]  # Q applied to the indicator
            rhs = float((w_head * head_mask * q_phi[paths_head[:, n - 1]]).sum())
            worst_n = max(worst_n, abs(lhs - rhs))
        per_n[n] = worst_n
        worst = max(worst, worst_n)
    return MarkovPropertyReport(max_discrepancy=worst, per_n=per_n)


def poisson_solve(transition, g, residual_tol: float = 1e-10) -> np.ndarray:
    """Solve (I - P) g_hat = g with the normalization pi(g_hat) = 0.

    Requires pi(g) = 0 (solvability) and the kernel of I - P to be the
    constants only; anything else raises.
    """

    P = np.asarray(transition, dtype=float)
    g = np.asarray(g, dtype=float)
    n = P.shape[0]
    A = np.eye(n) - P
    if np.linalg.matrix_rank(A, tol=1e-9) != n - 1:
        raise ValueError("singular system beyond the one-dimensional kernel")
    pi = _stationary_of(P)
    if abs(float(pi @ g)) > 1e-9:
        raise ValueError("g must be centered against pi")
    stacked = np.vstack([A, pi[None, :]])
    rhs = np.concatenate([g, [0.0]])
    g_hat, *_ = np.linalg.lstsq(stacked, rhs, rcond=None)
    residual = float(np.max(np.abs(A @ g_hat - g)))
    if residual > residual_tol:
        raise ValueError(f"poisson residual {residual:.2e} exceeds {residual_tol:.0e}")
    return g_hat


def _stationary_of(P: np.ndarray) -> np.ndarray:
    n = P.shape[0]
    A = np.vstack([P.T - np.eye(n), np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    return pi


def cesaro_average(op: TransitionOperator, h, n: int) -> np.ndarray:
    """(1/n) sum_{i<n} Q^i h, by iterated application."""
    h = np.asarray(h, dtype=float)
    acc = h.copy()
    power = h.copy()
    for _ in range(1, n):
        power = op.apply(power)
        acc += power
    return acc / n
