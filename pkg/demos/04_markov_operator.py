#!/usr/bin/env python3
"""Exact operator facts on a finite chain.

The one-step conditional-expectation operator of a finite ergodic chain
is its transition matrix, so the structural facts the limit theorems
lean on can be checked in exact arithmetic: the two-norm contraction, the
maximal-function level inequality, the weak-L2 tail, and the property
that makes the shifted system a Markov chain in the first place.
"""

import os

import numpy as np

from qlab import (derive_stream, dual_operator, hopf_check, maximal_function,
                  q_operator_from_model, verify_dunford_schwartz,
                  verify_markov_property, weak_l2_tail)
from qlab.cli import load_model

HERE = os.path.dirname(os.path.abspath(__file__))
MODEL = os.path.join(HERE, "..", "models", "markov_3state.json")


def main():
    model = load_model(MODEL)
    op = q_operator_from_model(model)
    rng = derive_stream(40404, [])

    print("state space:", model.n_states, "states; pi =",
          np.round(model.stationary, 6))

    funcs = [rng.child(0, i).normal(model.n_states) for i in range(100)]
    ds = verify_dunford_schwartz(op, funcs)
    print(f"L1/Linf contraction over {ds.checked} random functions: "
          f"{'ok' if ds.ok else ds.violations}")

    T = dual_operator(op)
    h, k = rng.child(1).normal(3), rng.child(2).normal(3)
    lhs = float(op.pi @ (op.apply(h) * k))
    rhs = float(op.pi @ (h * (T @ k)))
    print(f"duality pairing <Qh,k> = {lhs:.12f} vs <h,Tk> = {rhs:.12f}")

    mf = maximal_function(op, np.abs(model.observable), 1000)
    hopf = hopf_check(op, mf)
    print(f"maximal function (N = 1000): worst level product "
          f"{hopf.worst_product:.6f} <= |h|_1 = {hopf.l1_norm:.6f} -> "
          f"{'ok' if hopf.ok else 'VIOLATED'}")

    print(f"weak-L2 tail of g: {weak_l2_tail(model.observable, model.stationary):.6f}")

    mp = verify_markov_property(model, 3)
    print("markov-property discrepancy by block length:",
          {n: float(f"{v:.2e}") for n, v in mp.per_n.items()})


if __name__ == "__main__":
    main()
