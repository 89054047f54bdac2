#!/usr/bin/env python3
"""The two exact bookends: vanishing drift and the decomposition identity.

The conditional drift of the uncentered sums converges to a constant for
both bundled models, so |E0(S_N)|/sqrt(N) falls like N^(-1/2); that is
what lets the uncentered sums inherit the limit theorem when the
conditional norms are summable over sqrt(n).  The decomposition identity
rebuilds the centered sums from shifted projection components, pathwise.
"""

import os

from qlab import (decomposition_identity_check, derive_stream, sample_fixture,
                  uncentered_drift_check)
from qlab.cli import load_model

HERE = os.path.dirname(os.path.abspath(__file__))
MODELS = os.path.join(HERE, "..", "models")


def main():
    base = derive_stream(50505, [])
    Ns = [256, 1024, 4096]

    for branch, fname in enumerate(["linear_rho05.json", "markov_2state.json"]):
        model = load_model(os.path.join(MODELS, fname))
        fixtures = [sample_fixture(model, base.child(branch, 0, i))
                    for i in range(3)]
        print(f"=== {fname} ===")
        drift = uncentered_drift_check(model, fixtures, Ns)
        for i, row in enumerate(drift.table):
            cells = ", ".join(f"{v:.6f}" for v in row)
            print(f"  past {i}: |E0(S_N)|/sqrt(N) over N={Ns}: {cells} "
                  f"-> {drift.verdicts[i]}")
        rep = decomposition_identity_check(model, fixtures[0], 64,
                                           base.child(branch, 1))
        print(f"  decomposition residual over 64 steps x {rep.reps} paths: "
              f"{rep.residual:.2e} (allowance {rep.allowance:.2e})")
        print()
    print("Drift ratios drop by exactly 1/4 from N = 256 to 4096 once the")
    print("drift has converged; the identity residual is rounding noise.")


if __name__ == "__main__":
    main()
