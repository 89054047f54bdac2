"""Batch experiment runner.

``qlab <experiment> --model m.json --seed 42 [flags] --out dir/`` runs one
experiment and writes ``report.json`` plus CSV dumps; ``qlab run-all
--suite suite.json --out dir/`` runs a whole suite.  Exit codes: 0 all
verdicts pass, 2 statistical failure, 3 invalid input.  Outputs carry the
config digest and seed and are byte-identical for identical (config,
seed), whatever the worker count.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .experiments import (decomposition_identity_check, digest_of,
                          doob_bound_check, quenched_wip_experiment,
                          strest_experiment, uncentered_drift_check)
from .markov_ops import (cesaro_average, dual_operator, hopf_check,
                         maximal_function, q_operator_from_model,
                         verify_dunford_schwartz, verify_markov_property,
                         weak_l2_tail)
from .models import (LinearModel, MarkovFunctionalModel, sample_fixture)
from .paths import FUNCTIONAL_KINDS, PathFunctional
from .projections import (HannanDivergesError, hannan_sum, mw_criterion,
                          projection_norms, sigma_squared)
from .streams import InnovationDistribution, derive_stream

PASS_FRACTION = 0.9


class CLIError(Exception):
    def __init__(self, message: str, code: int = 3):
        super().__init__(message)
        self.code = code


@dataclass
class RunConfig:
    experiment: str
    model_path: str
    seed: int
    n: int = 4096
    reps: int = 5000
    fixtures: int = 10
    functional: str = "endpoint"
    Ns: list = field(default_factory=lambda: [256, 1024, 4096])
    r: float = math.inf
    K: int = 64
    alpha: float = 0.01
    d_threshold: float = 0.03
    workers: int = 1
    out: str = "out"
    name: str = ""

    def __post_init__(self):
        for label, value in (("n", self.n), ("reps", self.reps),
                             ("fixtures", self.fixtures), ("workers", self.workers)):
            if value < 1:
                raise CLIError(f"invalid config: {label} must be >= 1")
        if self.seed is None:
            raise CLIError("invalid config: seed is required (no clock default)")
        if self.seed < 0:
            raise CLIError("invalid config: seed must be a nonnegative integer")

    def describe(self) -> dict:
        return {
            "experiment": self.experiment, "model": os.path.basename(self.model_path),
            "seed": self.seed, "n": self.n, "reps": self.reps,
            "fixtures": self.fixtures, "functional": self.functional,
            "Ns": list(self.Ns), "r": (self.r if self.r != math.inf else "inf"),
            "K": self.K, "alpha": self.alpha, "d_threshold": self.d_threshold,
        }


def load_model(path: str):
    """Parse and validate a model definition file."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise CLIError(f"cannot read model file {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CLIError(f"model file {path!r} is not valid JSON: {exc}") from exc
    try:
        kind = raw.get("type")
        if kind == "linear":
            innovation = raw.get("innovation", {"kind": "gaussian", "variance": 1.0})
            return LinearModel(
                coeffs=np.asarray(raw["coeffs"], dtype=float),
                innovation=InnovationDistribution(innovation["kind"],
                                                  innovation.get("variance", 1.0)),
                tail_bound=float(raw.get("tail_bound", 0.0)))
        if kind == "markov":
            return MarkovFunctionalModel(np.asarray(raw["P"], dtype=float),
                                         np.asarray(raw["g"], dtype=float))
        raise CLIError(f"model file {path!r}: unknown type {kind!r}")
    except CLIError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CLIError(f"model file {path!r} failed validation: {exc}") from exc


def _require_markov(model, experiment: str):
    if not isinstance(model, MarkovFunctionalModel):
        raise CLIError(f"experiment {experiment!r} requires a markov model")


# --- output helpers -------------------------------------------------------

def _write_json(path: str, payload: dict):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path: str, header: str, rows):
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v)
                              for v in row) + "\n")


def _sample_outputs(out_dir: str, values: np.ndarray, ref_cdf):
    _write_csv(os.path.join(out_dir, "sample.csv"), "replication,value",
               ((i, float(v)) for i, v in enumerate(values)))
    xs = np.sort(values)
    ecdf = np.arange(1, xs.size + 1) / xs.size
    ref = np.asarray(ref_cdf(xs), dtype=float)
    _write_csv(os.path.join(out_dir, "cdf.csv"), "x,ecdf,ref_cdf",
               ((float(x), float(e), float(r)) for x, e, r in zip(xs, ecdf, ref)))


# --- experiment runners ---------------------------------------------------

def _sampled_fixtures(model, base, count):
    return [sample_fixture(model, base.child(0, i)) for i in range(count)]


def _run_wip(config: RunConfig, model, base, experiment: str):
    functional = PathFunctional(config.functional if experiment == "quenched-wip"
                                else "endpoint")
    fixtures = _sampled_fixtures(model, base, config.fixtures)
    reports, first_sample = [], None
    for i, fixture in enumerate(fixtures):
        sink = {} if i == 0 else None
        report = quenched_wip_experiment(model, fixture, functional, config.n,
                                         config.reps, base.child(1, i),
                                         alpha=config.alpha,
                                         d_threshold=config.d_threshold,
                                         workers=config.workers,
                                         sample_sink=sink)
        report.experiment = experiment
        reports.append(report.to_dict())
        if sink is not None:
            first_sample = sink
    verdicts = [r["verdict"] for r in reports]
    frac = sum(v in ("pass", "degenerate") for v in verdicts) / len(verdicts)
    passed = frac >= PASS_FRACTION
    payload = {"reports": reports, "pass_fraction": frac,
               "required_fraction": PASS_FRACTION}
    return payload, passed, first_sample


def _run_strest(config: RunConfig, model, base):
    fixtures = _sampled_fixtures(model, base, config.fixtures)
    reports = [strest_experiment(model, fixture, config.r, config.Ns, config.reps,
                                 base.child(1, i), workers=config.workers).to_dict()
               for i, fixture in enumerate(fixtures)]
    passed = all(r["verdict"] == "pass" for r in reports)
    return {"reports": reports}, passed, None


def _run_drift(config: RunConfig, model, base):
    fixtures = _sampled_fixtures(model, base, config.fixtures)
    report = uncentered_drift_check(model, fixtures, config.Ns)
    payload = {"Ns": report.Ns,
               "ratios": [[float(v) for v in row] for row in report.table],
               "verdicts": report.verdicts, "verdict": report.verdict}
    return {"reports": [payload]}, report.verdict == "pass", None


def _run_doob(config: RunConfig, model, base):
    _require_markov(model, "doob")
    fixtures = _sampled_fixtures(model, base, config.fixtures)
    reports = []
    for i, fixture in enumerate(fixtures):
        rep = doob_bound_check(model, fixture, config.n, config.reps,
                               base.child(1, i), workers=config.workers)
        reports.append({"fixture": fixture.describe(), "lhs": rep.lhs,
                        "rhs": rep.rhs, "rhs_strict": rep.rhs_strict,
                        "relative_se": rep.relative_se, "holds": rep.holds,
                        "strict_holds": rep.strict_holds, "terms": rep.terms})
    return {"reports": reports}, all(r["holds"] for r in reports), None


def _run_identity(config: RunConfig, model, base):
    fixtures = _sampled_fixtures(model, base, config.fixtures)
    reports = []
    for i, fixture in enumerate(fixtures):
        rep = decomposition_identity_check(model, fixture, config.n, base.child(1, i))
        reports.append({"fixture": fixture.describe(), "residual": rep.residual,
                        "allowance": rep.allowance, "verdict": rep.verdict})
    return {"reports": reports}, all(r["verdict"] == "pass" for r in reports), None


def _series_payload(config: RunConfig, model, which: str):
    series = projection_norms(model, config.K)
    rows = list(zip(range(config.K + 1),
                    (float(v) for v in series.norms),
                    (float(v) for v in series.bias)))
    if which == "project-norms":
        block = {"partial_sum": float(series.norms.sum()), "K": config.K,
                 "verdict": "computed"}
    elif which == "hannan":
        rep = hannan_sum(series)
        block = {"partial_sum": float(rep.partial_sums[-1]),
                 "tail_fit": rep.tail_fit, "fitted_tail": rep.fitted_tail,
                 "verdict": rep.verdict}
    elif which == "mw":
        rep = mw_criterion(model, max(config.K, 1))
        rows = list(zip(range(1, rep.terms.size + 1),
                        (float(v) for v in rep.terms),
                        (0.0 for _ in rep.terms)))
        block = {"partial_sum": float(rep.partial_sums[-1]),
                 "verdict": rep.verdict}
    else:  # sigma2
        block = {"sigma2": sigma_squared(model), "verdict": "computed"}
    return rows, block


def _run_series(config: RunConfig, model, base, which: str):
    rows, block = _series_payload(config, model, which)
    return {"reports": [block], "csv_rows": rows}, True, None


def _run_markov_check(config: RunConfig, model, base):
    _require_markov(model, "markov-check")
    op = q_operator_from_model(model)
    S = model.n_states
    rng = base.child(0)
    funcs = [rng.normal(S) for _ in range(100)]
    ds = verify_dunford_schwartz(op, funcs)
    T = dual_operator(op)
    dual_err = 0.0
    for _ in range(50):
        h, k = rng.normal(S), rng.normal(S)
        lhs = float(op.pi @ (op.apply(h) * k))
        rhs = float(op.pi @ (h * (T @ k)))
        dual_err = max(dual_err, abs(lhs - rhs))
    markov = verify_markov_property(model, min(3, 4))
    ces = cesaro_average(op, model.observable, 1000)
    ces_err = float(np.max(np.abs(ces - float(op.pi @ model.observable))))
    payload = {
        "dunford_schwartz": {"ok": ds.ok, "checked": ds.checked,
                             "violations": ds.violations},
        "duality_max_error": dual_err,
        "markov_property_max_discrepancy": markov.max_discrepancy,
        "cesaro_error_at_1000": ces_err,
    }
    passed = ds.ok and dual_err <= 1e-12 and markov.max_discrepancy <= 1e-12
    return {"reports": [payload]}, passed, None


def _run_hopf(config: RunConfig, model, base):
    _require_markov(model, "hopf")
    op = q_operator_from_model(model)
    N = 1000
    rng = base.child(0)
    functions = [np.abs(model.observable)] + [rng.normal(model.n_states)
                                              for _ in range(20)]
    reports = []
    for idx, h in enumerate(functions):
        rep = hopf_check(op, maximal_function(op, h, N))
        reports.append({"function": idx, "ok": rep.ok, "l1_norm": rep.l1_norm,
                        "worst_level": rep.worst_level,
                        "worst_product": rep.worst_product})
    return {"reports": reports, "truncation": N}, all(r["ok"] for r in reports), None


def _run_weak_l2(config: RunConfig, model, base):
    _require_markov(model, "weak-l2")
    value = weak_l2_tail(model.observable, model.stationary)
    return {"reports": [{"weak_l2_tail": value, "verdict": "computed"}]}, True, None


EXPERIMENTS = {
    "quenched-clt": ("KS of the centered endpoint law against its normal limit",
                     lambda c, m, b: _run_wip(c, m, b, "quenched-clt")),
    "quenched-wip": ("KS of a path functional against its Brownian limit",
                     lambda c, m, b: _run_wip(c, m, b, "quenched-wip")),
    "strest": ("decay of the maximal squared martingale-approximation error",
               lambda c, m, b: _run_strest(c, m, b)),
    "drift": ("exact vanishing check of the conditional drift over sqrt(N)",
              lambda c, m, b: _run_drift(c, m, b)),
    "doob": ("Monte Carlo maximal bound vs exact maximal functions (markov)",
             lambda c, m, b: _run_doob(c, m, b)),
    "identity": ("pathwise check of the centered-sum decomposition",
                 lambda c, m, b: _run_identity(c, m, b)),
    "project-norms": ("closed-form projection norms as CSV",
                      lambda c, m, b: _run_series(c, m, b, "project-norms")),
    "hannan": ("projection-norm summability verdict",
               lambda c, m, b: _run_series(c, m, b, "hannan")),
    "mw": ("summability of conditional norms over sqrt(n)",
           lambda c, m, b: _run_series(c, m, b, "mw")),
    "sigma2": ("long-run variance from the martingale increment",
               lambda c, m, b: _run_series(c, m, b, "sigma2")),
    "markov-check": ("operator contraction, duality and Markov property (markov)",
                     lambda c, m, b: _run_markov_check(c, m, b)),
    "hopf": ("maximal-function level inequality in exact arithmetic (markov)",
             lambda c, m, b: _run_hopf(c, m, b)),
    "weak-l2": ("weak-L2 tail functional of the observable (markov)",
                lambda c, m, b: _run_weak_l2(c, m, b)),
}


def list_experiments() -> list[tuple[str, str]]:
    return [(name, desc) for name, (desc, _) in EXPERIMENTS.items()]


def run(config: RunConfig, base_path=()) -> int:
    """Execute one configured experiment, writing artifacts to config.out."""
    if config.experiment not in EXPERIMENTS:
        raise CLIError(f"unknown experiment name: {config.experiment!r}")
    model = load_model(config.model_path)
    base = derive_stream(config.seed, base_path)
    _, runner = EXPERIMENTS[config.experiment]
    try:
        payload, passed, sample_sink = runner(config, model, base)
    except HannanDivergesError as exc:
        raise CLIError(f"experiment refused: {exc}") from exc
    try:
        os.makedirs(config.out, exist_ok=True)
        csv_rows = payload.pop("csv_rows", None)
        document = {
            "config": config.describe(),
            "config_digest": digest_of(config.describe()),
            "seed": config.seed,
            "seed_path": [config.seed, *base_path],
            "model_digest": digest_of(model),
            "verdict": "pass" if passed else "fail",
            **payload,
        }
        _write_json(os.path.join(config.out, "report.json"), document)
        if csv_rows is not None:
            _write_csv(os.path.join(config.out, "series.csv"), "k,norm,bias", csv_rows)
        if sample_sink is not None:
            _sample_outputs(config.out, sample_sink["values"], sample_sink["ref_cdf"])
    except OSError as exc:
        raise CLIError(f"cannot write outputs under {config.out!r}: {exc}") from exc
    return 0 if passed else 2


def run_suite(suite_path: str, out_root: str, workers: int = 1) -> int:
    """Run every entry of a suite file; exit 0 only if every run passes."""
    try:
        with open(suite_path) as fh:
            suite = json.load(fh)
    except OSError as exc:
        raise CLIError(f"cannot read suite file {suite_path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CLIError(f"suite file {suite_path!r} is not valid JSON: {exc}") from exc
    runs = suite.get("runs")
    if not isinstance(runs, list) or not runs:
        raise CLIError(f"suite file {suite_path!r} has no runs")
    default_seed = suite.get("seed")
    base_dir = os.path.dirname(os.path.abspath(suite_path))
    summary, worst = [], 0
    for index, entry in enumerate(runs):
        entry = dict(entry)
        name = entry.pop("name", f"run-{index:03d}")
        seed = entry.pop("seed", default_seed)
        if seed is None:
            raise CLIError(f"suite run {name!r}: no seed given and no suite default")
        if entry.get("r") == "inf":
            entry["r"] = math.inf
        model_path = entry.pop("model")
        if not os.path.isabs(model_path):
            model_path = os.path.join(base_dir, model_path)
        experiment = entry.pop("experiment")
        config = RunConfig(experiment=experiment, model_path=model_path, seed=seed,
                           out=os.path.join(out_root, name), name=name,
                           workers=workers, **entry)
        code = run(config, base_path=(index,))
        summary.append({"name": name, "experiment": experiment, "exit": code})
        worst = max(worst, code)
        print(f"{name}: {'pass' if code == 0 else 'FAIL'}")
    os.makedirs(out_root, exist_ok=True)
    _write_json(os.path.join(out_root, "summary.json"),
                {"runs": summary, "exit": worst})
    return worst


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qlab",
        description="stochastic-limit-theorem verification lab")
    parser.add_argument("experiment", help="experiment name, 'run-all' or 'list'")
    parser.add_argument("--model", help="model definition JSON file")
    parser.add_argument("--seed", type=int, help="master seed (required)")
    parser.add_argument("--n", type=int, default=4096)
    parser.add_argument("--reps", type=int, default=5000)
    parser.add_argument("--fixtures", type=int, default=10)
    parser.add_argument("--functional", default="endpoint", choices=FUNCTIONAL_KINDS)
    parser.add_argument("--Ns", default="256,1024,4096",
                        help="comma-separated horizons for strest/drift")
    parser.add_argument("--r", default="inf",
                        help="martingale truncation order (integer or 'inf')")
    parser.add_argument("--K", type=int, default=64, help="projection horizon")
    parser.add_argument("--alpha", type=float, default=0.01)
    parser.add_argument("--d-threshold", type=float, default=0.03,
                        help="KS distance bound for the supremum verdict")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--suite", help="suite file for run-all")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.experiment == "list":
            for name, desc in list_experiments():
                print(f"{name}: {desc}")
            return 0
        if args.experiment == "run-all":
            if not args.suite:
                raise CLIError("run-all requires --suite")
            return run_suite(args.suite, args.out, workers=args.workers)
        if args.experiment not in EXPERIMENTS:
            raise CLIError(f"unknown experiment name: {args.experiment!r}")
        if not args.model:
            raise CLIError("missing --model")
        if args.seed is None:
            raise CLIError("missing --seed (runs never default to the clock)")
        config = RunConfig(
            experiment=args.experiment, model_path=args.model, seed=args.seed,
            n=args.n, reps=args.reps, fixtures=args.fixtures,
            functional=args.functional,
            Ns=[int(v) for v in args.Ns.split(",") if v],
            r=(math.inf if args.r == "inf" else int(args.r)),
            K=args.K, alpha=args.alpha, d_threshold=args.d_threshold,
            workers=args.workers, out=args.out)
        return run(config)
    except CLIError as exc:
        print(f"qlab: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
