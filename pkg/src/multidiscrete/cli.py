"""Command line interface.

Subcommands: ``validate``, ``bounds``, ``build``, ``generate``, ``replicate``.
Exit codes: 0 success, 1 domain failure (validation, feasibility,
convergence), 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .calibration import trajectories_csv
from .config import ConfigError, load_config
from .corr_bounds import check_target_matrix
from .engine import build_plan, generate, load_plan, save_plan, write_dataset
from .eval_harness import PRESET_FILES, SIZES, Scenario, preset, run_replication
from .exceptions import CalibrationError, InfeasibleCorrelationError, MultiDiscreteError
from .collapse import collapse_margin
from .marginals import truncate_support, validate_spec

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2
DEFAULT_SEED = 2345


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _out(text, path=None):
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _seed(args, cfg):
    if args.seed is not None:
        return args.seed
    return cfg.seed if cfg is not None and cfg.seed is not None else DEFAULT_SEED


def _opts(args, cfg):
    return cfg.options(
        seed=_seed(args, cfg),
        tolerance=getattr(args, "tolerance", None),
        n_binary=getattr(args, "n_binary", None),
        step_fraction=getattr(args, "step_fraction", None),
    )


def _report_validation(cfg):
    ok = True
    lines = []
    for k, spec in enumerate(cfg.margins, start=1):
        rep = validate_spec(spec)
        ok &= rep.ok
        status = "ok" if rep.ok else "INVALID"
        lines.append(f"margin {k}: {spec}  {status}")
        lines.extend(f"  - {m}" for m in rep.messages())
    return ok, "\n".join(lines)


def cmd_validate(args):
    cfg = load_config(args.config)
    ok, text = _report_validation(cfg)
    try:
        from .gaussian_core import check_correlation_matrix

        check_correlation_matrix(cfg.correlation, "correlation matrix")
        text += "\ncorrelation matrix: ok"
    except ValueError as exc:
        ok = False
        text += f"\ncorrelation matrix: INVALID\n  - {exc}"
    _out(text, args.out)
    return EXIT_OK if ok else EXIT_DOMAIN


def cmd_bounds(args):
    cfg = load_config(args.config)
    ok, text = _report_validation(cfg)
    if not ok:
        print(text, file=sys.stderr)
        return EXIT_DOMAIN
    margins = [collapse_margin(truncate_support(s)) for s in cfg.margins]
    report = check_target_matrix(margins, cfg.correlation, seed=_seed(args, cfg))
    if args.json:
        _out(json.dumps(report.to_dict(), indent=1), args.out)
    else:
        _out(report.format(), args.out)
    if not report.feasible:
        names = ", ".join(p.label for p in report.infeasible_pairs())
        print(f"infeasible: {names}", file=sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK


def cmd_build(args):
    cfg = load_config(args.config)
    opts = _opts(args, cfg)
    try:
        plan = build_plan(cfg.margins, cfg.correlation, opts, labels=cfg.labels)
    except InfeasibleCorrelationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.report is not None:
            print(exc.report.format(), file=sys.stderr)
        return EXIT_DOMAIN
    except CalibrationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if args.trajectories and exc.calibrations:
            _out(trajectories_csv(exc.calibrations), args.trajectories)
        return EXIT_DOMAIN
    out = args.out or "plan.json"
    save_plan(plan, out)
    if args.trajectories:
        _out(trajectories_csv(plan.calibrations), args.trajectories)
    print(f"plan written to {out} (sha256 {plan.sha256()[:12]})", file=sys.stderr)
    return EXIT_OK


def cmd_generate(args):
    if args.n is None or args.n < 1:
        print("error: --n must be a positive integer", file=sys.stderr)
        return EXIT_USAGE
    try:
        plan = load_plan(args.plan)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"error: cannot read plan {args.plan}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    seed = args.seed if args.seed is not None else DEFAULT_SEED
    ds = generate(plan, args.n, seed)
    out = args.out or "data.csv"
    csv_path, meta_path = write_dataset(ds, out)
    print(f"{ds.n}x{plan.dim} dataset written to {csv_path} (metadata {meta_path})", file=sys.stderr)
    return EXIT_OK


def cmd_replicate(args):
    target = args.scenario
    R = args.replications
    if Path(target).suffix == ".json" or Path(target).exists():
        cfg = load_config(target)
        scenario = Scenario.from_config(cfg, n=args.n, replications=R)
        seed = _seed(args, cfg)
        opts = _opts(args, cfg)
    else:
        try:
            scenario = preset(target, R if R is not None else 200)
        except KeyError as exc:
            print(f"error: {exc.args[0]}", file=sys.stderr)
            return EXIT_USAGE
        if args.n is not None:
            scenario = Scenario(scenario.name, scenario.specs, scenario.sigma_star, args.n,
                                scenario.replications, scenario.labels)
        seed = args.seed if args.seed is not None else DEFAULT_SEED
        from .calibration import CalibrationOptions

        opts = CalibrationOptions(**{k: v for k, v in {
            "seed": seed, "tolerance": args.tolerance, "n_binary": args.n_binary,
            "step_fraction": args.step_fraction}.items() if v is not None})
    table = run_replication(scenario, seed, opts)
    out = args.out or f"{scenario.name}.csv"
    Path(out).write_text(table.to_csv(), encoding="utf-8")
    print(table.format())
    if scenario.replications == 1:
        print("warning: R=1, SD column undefined", file=sys.stderr)
    return EXIT_OK


def make_parser():
    presets = ", ".join(f"{b}-{s}" for b in PRESET_FILES for s in SIZES)
    p = _Parser(prog="multidiscrete", description="Correlated multivariate discrete data generation.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config=True):
        if config:
            sp.add_argument("config", help="JSON run config")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output path")

    def calib(sp):
        sp.add_argument("--tolerance", type=float)
        sp.add_argument("--n-binary", type=int, dest="n_binary")
        sp.add_argument("--step-fraction", type=float, dest="step_fraction")

    sp = sub.add_parser("validate", help="check margin parameters and the correlation matrix")
    common(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("bounds", help="report attainable correlation bounds per pair")
    common(sp)
    sp.add_argument("--json", action="store_true", help="JSON instead of a text table")
    sp.set_defaults(func=cmd_bounds)

    sp = sub.add_parser("build", help="calibrate and write a generation plan")
    common(sp)
    calib(sp)
    sp.add_argument("--trajectories", help="CSV of per-pair calibration iterations")
    sp.set_defaults(func=cmd_build)

    sp = sub.add_parser("generate", help="draw a dataset from a plan")
    sp.add_argument("plan", help="plan JSON written by 'build'")
    common(sp, config=False)
    sp.add_argument("--n", type=int, required=True)
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("replicate", help="run a replication study",
                        description=f"Presets: {presets}. A path to a JSON config also works.")
    sp.add_argument("scenario", help="preset name or config path")
    common(sp, config=False)
    calib(sp)
    sp.add_argument("--replications", type=int)
    sp.add_argument("--n", type=int, help="rows per dataset")
    sp.set_defaults(func=cmd_replicate)
    return p


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MultiDiscreteError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
