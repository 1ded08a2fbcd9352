"""Command-line entry point ``oce``.

Subcommands: ``batch``, ``stream``, ``bounds``, ``bandit`` and
``experiment``. A ``--model`` argument is a model file path, or
``bundled:<name>`` for a shipped fixture (``credit_25``,
``normal_synthetic``).
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import bounds as bd
from .bandit import read_instance, run_oce_sr
from .batch import estimate_oce, ground_truth
from .disutility import parse_spec
from .errors import DomainError, OCEError
from .harness import EXPERIMENTS, ExperimentConfig, ExperimentError, run_experiment, write_csv
from .loss_models import bundled_model_path, read_model, sample
from .streaming import StepSchedule, run_many


def _model(arg: str):
    if arg.startswith("bundled:"):
        return read_model(bundled_model_path(arg.split(":", 1)[1]))
    return read_model(arg)


def _ints(text: str) -> list:
    return [int(v) for v in text.split(",")]


def _floats(text: str) -> list:
    return [float(v) for v in text.split(",")]


def cmd_batch(args) -> int:
    model, spec = _model(args.model), parse_spec(args.phi)
    truth = ground_truth(model, spec, args.seed)
    rows = []
    for r in range(args.reps):
        est = estimate_oce(sample(model, args.n, args.seed + r), spec)
        rows.append((args.n, r, est.e_hat, est.oce_hat, est.e_hat - truth.e_star, est.oce_hat - truth.oce))
    write_csv(args.out, ("n", "rep", "e_hat", "oce_hat", "err_e", "err_oce"), rows, args.seed)
    return 0


def cmd_stream(args) -> int:
    model, spec = _model(args.model), parse_spec(args.phi)
    checkpoints = _ints(args.checkpoints) if args.checkpoints else [args.m]
    if checkpoints[-1] != args.m:
        raise DomainError("the last checkpoint must equal --m")
    truth = ground_truth(model, spec, args.seed)
    x = np.stack([sample(model, args.m, args.seed + r).values for r in range(args.reps)])
    path = run_many(x, spec, StepSchedule(args.b, args.alpha), args.t0, checkpoints)
    rows = []
    for i, m in enumerate(path.checkpoints):
        for r in range(args.reps):
            tb, oce = path.t_bar[i, r], path.oce_sa[i, r]
            rows.append((m, r, tb, oce, tb - truth.e_star, oce - truth.oce))
    write_csv(args.out, ("m", "rep", "t_bar", "oce_sa", "err_t", "err_oce"), rows, args.seed)
    return 0


_PROBABILITIES = {"conc-min", "conc-oce", "bandit"}


def cmd_bounds(args) -> int:
    consts = [bd.parse_constants(Path(p).read_text()) for p in args.constants]
    k = consts[0]
    ns = _ints(args.n)
    params = _floats(args.eps) if args.eps else (_floats(args.delta) if args.delta else [math.nan])
    needs = {"conc-min": "eps", "conc-oce": "eps", "radius": "delta"}
    if args.which in needs and getattr(args, needs[args.which]) is None:
        raise DomainError(f"--which {args.which} needs --{needs[args.which]}")
    rows = []
    for n in ns:
        for p in params:
            if args.which == "mse-min":
                v = bd.mse_bound_minimizer(k, n)
            elif args.which == "conc-min":
                v = bd.conc_bound_minimizer(k, n, p)
            elif args.which == "mse-oce":
                v = bd.mse_bound_oce(k, n)
            elif args.which == "conc-oce":
                v = bd.conc_bound_oce(k, n, p)
            elif args.which == "radius":
                v = bd.high_conf_radius(k, n, p)
            elif args.which == "k0":
                v = bd.sa_k0(k)
            elif args.which == "sa-oce":
                v = bd.sa_oce_bound(k, n, statement_form=args.statement_form)
            else:
                if not args.gaps:
                    raise DomainError("--which bandit needs --gaps")
                v = bd.bandit_bound(consts, _floats(args.gaps), n, len(consts), capped=False)
            capped = min(1.0, v) if args.which in _PROBABILITIES else v
            rows.append((args.which, n, "" if math.isnan(p) else p, v, capped))
    param = "eps" if args.eps else ("delta" if args.delta else "param")
    write_csv(args.out, ("which", "n", param, "value", "value_capped"), rows, 0)
    return 0


def cmd_bandit(args) -> int:
    inst = read_instance(args.instance)
    best = inst.best_arm
    rows = []
    for n in _ints(args.n):
        correct = 0
        for r in range(args.reps):
            chosen = run_oce_sr(inst, n, args.seed + r).chosen
            correct += chosen == best
            rows.append((n, r, chosen, int(chosen == best)))
        rows.append((n, "summary", "", correct / args.reps))
    write_csv(args.out, ("n", "rep", "chosen", "correct"), rows, args.seed)
    return 0


def cmd_experiment(args) -> int:
    overrides = dict(kv.split("=", 1) for kv in args.set)
    cfg = ExperimentConfig(args.name, args.reps, args.seed, tuple(_ints(args.grid)) if args.grid else None, overrides)
    try:
        result = run_experiment(cfg, args.outdir)
    except ExperimentError as exc:
        print(f"FAIL {exc}", file=sys.stderr)
        return 1
    for c in result.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: measured {c.measured}, required {c.required}")
    return 0 if result.passed else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="oce", description="OCE risk estimation, bounds and best-arm identification.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("batch", help="sample-average estimates over seeded replications")
    p.add_argument("--model", required=True)
    p.add_argument("--phi", required=True, help="e.g. mean-variance:c=0.5")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("stream", help="stochastic-approximation estimates over seeded replications")
    p.add_argument("--model", required=True)
    p.add_argument("--phi", required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--checkpoints", help="comma-separated m values ending at --m")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stream)

    p = sub.add_parser("bounds", help="evaluate a finite-sample bound")
    p.add_argument("--which", required=True,
                   choices=["mse-min", "conc-min", "mse-oce", "conc-oce", "radius", "k0", "sa-oce", "bandit"])
    p.add_argument("--constants", required=True, action="append",
                   help="key=value constants file; repeat once per arm for --which bandit")
    p.add_argument("--n", required=True, help="sample size (or m, or bandit budget); comma list allowed")
    grp = p.add_mutually_exclusive_group()
    grp.add_argument("--eps")
    grp.add_argument("--delta")
    p.add_argument("--gaps", help="comma-separated gaps of arms ranked 2..K")
    p.add_argument("--statement-form", action="store_true",
                   help="sa-oce: use Var(phi) instead of its square root in the last term")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("bandit", help="OCE successive rejects over seeded replications")
    p.add_argument("--instance", required=True)
    p.add_argument("--n", required=True, help="budget; comma list allowed")
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bandit)

    p = sub.add_parser("experiment", help="run a named experiment")
    p.add_argument("--name", required=True, choices=EXPERIMENTS)
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--outdir", required=True)
    p.add_argument("--grid", help="comma-separated sample sizes or checkpoints")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override, e.g. b=10 or alpha=0.6,0.8")
    p.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OCEError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
