"""Command-line interface: gen-synth, run, sweep, tune, curves.

Every subcommand accepts ``--config FILE``, a flat JSON object whose keys
mirror flag names (``"dirichlet-a": 2`` or ``"dirichlet_a": 2``).
Explicit flags override config values.  Exit codes: 0 success, 1 runtime
error, 2 usage error.
"""

import argparse
import io
import json
import sys

from .benchmark import default_alpha, default_lambda
from .classifiers import LossConfig, SinkhornConfig
from .data import SPLITS, SynthConfig, generate_synthetic, load_features, save_features
from .errors import DomainError, EvaluationError, FeatureFormatError
from .evaluation import EvalConfig, canonical_method, evaluate, best_value, sweep, write_sweep_csv
from .mathcore import entropy_gradient_curve, write_curve_csv
from .tasks import IMBALANCE_MODES, TaskSpec

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


def _float_list(text):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None
    return values


def _add_eval_flags(p, default_split):
    p.add_argument("--features", required=True, help="feature file (fsfv or csv)")
    p.add_argument("--format", choices=("fsfv", "csv"), help="default: from the file extension")
    p.add_argument("--split", choices=SPLITS, default=default_split)
    p.add_argument("--method", default="alpha_tim", help="simpleshot | tim | alpha-tim | sinkhorn-balanced")
    p.add_argument("--ways", type=int, default=5)
    p.add_argument("--shots", type=int, default=5)
    p.add_argument("--query", type=int, default=75, help="query samples per task")
    p.add_argument("--imbalance", choices=IMBALANCE_MODES, default="dirichlet")
    p.add_argument("--dirichlet-a", type=float, help="default: 1 on validation, 2 otherwise")
    p.add_argument("--minority", type=int, default=1, help="minority count for --imbalance step")
    p.add_argument("--tasks", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--alpha", type=float, help="default: tuned value for --shots")
    p.add_argument("--lambda", dest="lam", type=float, help="default: tuned value for --shots")
    p.add_argument("--tau", type=float, default=15.0)
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--no-ce", action="store_true")
    p.add_argument("--no-conditional", action="store_true")
    p.add_argument("--no-marginal", action="store_true")
    p.add_argument("--sinkhorn-eps", type=float, default=0.05)
    p.add_argument("--sinkhorn-iters", type=int, default=100)


def build_parser():
    parser = argparse.ArgumentParser(prog="alphatim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-synth", help="write a synthetic Gaussian-cluster feature set")
    g.add_argument("--classes", type=int, default=20)
    g.add_argument("--dim", type=int, default=64)
    g.add_argument("--per-class", type=int, default=600)
    g.add_argument("--separation", type=float, default=4.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--split", choices=SPLITS, default="test")
    g.add_argument("--format", choices=("fsfv", "csv"))
    g.add_argument("--out", required=True)

    r = sub.add_parser("run", help="evaluate one method over many tasks")
    _add_eval_flags(r, "test")
    r.add_argument("--out", help="JSON report path")
    r.add_argument("--per-task", action="store_true", help="include per-task accuracies in the report")

    s = sub.add_parser("sweep", help="evaluate over a list of alpha, lambda or dirichlet-a values")
    _add_eval_flags(s, "test")
    s.add_argument("--param", required=True)
    s.add_argument("--values", required=True, type=_float_list)
    s.add_argument("--out", help="CSV path (default: stdout)")

    t = sub.add_parser("tune", help="select alpha or lambda on validation tasks")
    _add_eval_flags(t, "validation")
    t.add_argument("--param", required=True)
    t.add_argument("--grid", required=True, type=_float_list)
    t.add_argument("--out", help="JSON path")

    c = sub.add_parser("curves", help="alpha-entropy and logit-gradient curves for two classes")
    c.add_argument("--alphas", required=True, type=_float_list)
    c.add_argument("--grid", type=int, default=201)
    c.add_argument("--out", help="CSV path (default: stdout)")

    for p in (g, r, s, t, c):
        p.add_argument("--config", help="flat JSON file of flag values")
    return parser, {"gen-synth": g, "run": r, "sweep": s, "tune": t, "curves": c}


def _apply_config(subparser, path):
    try:
        with open(path, encoding="utf-8") as fh:
            values = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        subparser.error(f"cannot read config {path}: {exc}")
    if not isinstance(values, dict):
        subparser.error("config file must hold a flat JSON object")
    dests = {a.dest for a in subparser._actions}
    defaults = {}
    for key, value in values.items():
        dest = key.lstrip("-").replace("-", "_")
        dest = "lam" if dest == "lambda" else dest
        if dest not in dests or dest == "config":
            subparser.error(f"unknown config key {key!r}")
        if isinstance(value, list):
            value = [float(v) for v in value]
        defaults[dest] = value
    subparser.set_defaults(**defaults)


def parse_args(argv):
    parser, subparsers = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        _apply_config(subparsers[args.command], args.config)
        args = parser.parse_args(argv)
    return args, subparsers[args.command]


def _eval_config(args, sub):
    try:
        method = canonical_method(args.method)
        a = args.dirichlet_a
        if a is None:
            a = 1.0 if args.split == "validation" else 2.0
        spec = TaskSpec(
            ways=args.ways,
            shots=args.shots,
            query_total=args.query,
            imbalance=args.imbalance,
            dirichlet_a=a,
            minority=args.minority,
            seed=args.seed,
        )
        loss = LossConfig(
            alpha=default_alpha(args.shots) if args.alpha is None else args.alpha,
            lam=default_lambda(args.shots) if args.lam is None else args.lam,
            tau=args.tau,
            iterations=args.iterations,
            learning_rate=args.lr,
            use_ce=not args.no_ce,
            use_conditional=not args.no_conditional,
            use_marginal=not args.no_marginal,
        )
        sk = SinkhornConfig(iterations=args.sinkhorn_iters, epsilon=args.sinkhorn_eps)
        return EvalConfig(method, spec, loss, sk, n_tasks=args.tasks, workers=args.workers)
    except DomainError as exc:
        sub.error(str(exc))


def _check_param(sub, param, choices):
    name = param.replace("-", "_")
    if name not in choices:
        sub.error(f"unknown --param {param!r}; choose from {', '.join(c.replace('_', '-') for c in choices)}")
    return name


def _write_text(path, text):
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_gen_synth(args, sub):
    try:
        cfg = SynthConfig(args.classes, args.dim, args.per_class, args.separation, args.seed)
    except DomainError as exc:
        sub.error(str(exc))
    fs = generate_synthetic(cfg, split_tag=args.split)
    save_features(fs, args.out, args.format)
    print(f"N={fs.n_samples} d={fs.dim} C={fs.n_classes} -> {args.out}")
    return EXIT_OK


def _load(args):
    return load_features(args.features, args.format, split_tag=args.split)


def cmd_run(args, sub):
    cfg = _eval_config(args, sub)
    report = evaluate(_load(args), cfg)
    if args.out:
        _write_text(args.out, report.to_json(per_task=args.per_task) + "\n")
    print(f"{cfg.method}: {100 * report.mean_accuracy:.2f} ± {100 * report.ci95:.2f} over {report.n_tasks} tasks")
    return EXIT_OK


def cmd_sweep(args, sub):
    param = _check_param(sub, args.param, ("alpha", "lambda", "dirichlet_a"))
    if not args.values:
        sub.error("--values must list at least one number")
    cfg = _eval_config(args, sub)
    results = sweep(_load(args), cfg, param, args.values)


    buf = io.StringIO()
    write_sweep_csv(results, buf)
    _write_text(args.out, buf.getvalue())
    return EXIT_OK


def cmd_tune(args, sub):
    param = _check_param(sub, args.param, ("alpha", "lambda"))
    if not args.grid:
        sub.error("--grid must list at least one number")
    cfg = _eval_config(args, sub)
    results = sweep(_load(args), cfg, param, args.grid)
    best = best_value(results)
    doc = {
        "param": param,
        "best": best,
        "method": cfg.method,
        "grid": [
            {"value": v, "mean_accuracy": r.mean_accuracy, "ci95": r.ci95} for v, r in results
        ],
        "fingerprint": cfg.fingerprint(),
    }
    if args.out:
        _write_text(args.out, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"best {param} = {best:g}")
    return EXIT_OK


def cmd_curves(args, sub):
    if not args.alphas:
        sub.error("--alphas must list at least one value")
    if any(a <= 0 for a in args.alphas):
        sub.error("every alpha must be positive")
    if args.grid < 3:
        sub.error("--grid must be at least 3")


    buf = io.StringIO()
    write_curve_csv(entropy_gradient_curve(args.alphas, args.grid), buf)
    _write_text(args.out, buf.getvalue())
    return EXIT_OK


COMMANDS = {
    "gen-synth": cmd_gen_synth,
    "run": cmd_run,
    "sweep": cmd_sweep,
    "tune": cmd_tune,
    "curves": cmd_curves,
}


def main(argv=None):
    try:
        args, sub = parse_args(argv)
        return COMMANDS[args.command](args, sub)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except EvaluationError as exc:
        print(f"error: evaluation failed at task_index={exc.task_index}: {exc.cause}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, FeatureFormatError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
