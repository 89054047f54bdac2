#!/usr/bin/env python3
"""Sample under the conditional law of a frozen past and test the limits.

Freezes a handful of pasts, replicates the centered partial-sum path
under each conditional law, and compares endpoint and supremum laws with
their Brownian limits.  The centering matters: the uncentered endpoint
law would drag a past-dependent drift along and the comparison would
fail for most pasts.
"""

import os

from qlab import (PathFunctional, derive_stream, quenched_clt_experiment,
                  quenched_wip_experiment, sample_fixture)
from qlab.cli import load_model

HERE = os.path.dirname(os.path.abspath(__file__))
MODEL = os.path.join(HERE, "..", "models", "linear_rho05.json")


def main():
    model = load_model(MODEL)
    base = derive_stream(20240, [])
    n, reps = 1024, 2000

    print(f"model: geometric linear, n = {n}, replications = {reps}")
    print("\nconditionally centered CLT under five frozen pasts:")
    for i in range(5):
        fixture = sample_fixture(model, base.child(0, i))
        rep = quenched_clt_experiment(model, fixture, n, reps, base.child(1, i))
        print(f"  past {i}: KS D = {rep.test_statistic:.4f}, "
              f"p = {rep.p_value:.3f} -> {rep.verdict}")

    print("\npath functionals under one frozen past:")
    fixture = sample_fixture(model, base.child(0, 0))
    for kind in ("supremum", "sup-abs", "time-integral"):
        rep = quenched_wip_experiment(model, fixture, PathFunctional(kind),
                                      n, reps, base.child(2), ref_reps=20_000)
        print(f"  {kind:13s}: D = {rep.test_statistic:.4f}, "
              f"p = {rep.p_value:.3f}, reference = {rep.details['reference']}")

    print("\nThe supremum comparison uses the closed reflection-principle CDF;")
    print("its D carries a ~0.58 sigma/sqrt(n) polygonal bias and is judged")
    print("by a distance threshold rather than the p-value.")


if __name__ == "__main__":
    main()
