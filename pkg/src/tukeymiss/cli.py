"""Command-line entry point: ``tukeymiss <subcommand> ...``.

Exit codes: 0 success, 2 config/validation error, 3 prior incompatible with
the fitted model, 4 data precondition failed, 5 oracle tolerance exceeded.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import data_io
from .core import missing_model
from .inference import (
    DataPreconditionError,
    McmcConfig,
    PriorConfig,
    PriorIncompatibleError,
    fit,
    impute,
    posterior_estimands,
    summarize,
)
from .oracle import (
    QuadratureConfig,
    missing_density_pointwise,
    moments_quadrature,
    q_quadrature,
)
from .simulate import ModelValidationError, SimConfig, TukeyProcess, simulate

log = logging.getLogger("tukeymiss")

EXIT_OK, EXIT_CONFIG, EXIT_PRIOR, EXIT_DATA, EXIT_ORACLE = 0, 2, 3, 4, 5
ORACLE_TOL = 1e-8


class CliError(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(message)


def _require_distinct(inputs, outputs):
    if not data_io.paths_distinct(inputs, outputs):
        raise CliError(EXIT_CONFIG, "output paths must differ from input paths")


def _prefix_dir(prefix):
    try:
        data_io.ensure_parent(prefix)
    except FileNotFoundError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from None


def _load(path, expect):
    try:
        cfg = data_io.read_config(path)
    except ModelValidationError as exc:
        raise CliError(EXIT_CONFIG, "model validation failed:\n  " +
                       "\n  ".join(str(v) for v in exc.violations)) from None
    except (data_io.ConfigError, OSError) as exc:
        raise CliError(EXIT_CONFIG, f"invalid config {path}: {exc}") from None
    if not isinstance(cfg, expect):
        raise CliError(EXIT_CONFIG, f"{path} is not a {expect.__name__} document")
    return cfg


def cmd_simulate(args) -> int:
    cfg = _load(args.config, SimConfig)
    data_path, truth_path = f"{args.out}.data.csv", f"{args.out}.truth.json"
    _prefix_dir(args.out)
    _require_distinct([args.config], [data_path, truth_path])
    data, truth = simulate(cfg)
    data_io.write_dataset(data, data_path)
    data_io.write_truth(truth, truth_path)
    log.info("wrote %s (%d observed, %s missing) and %s", data_path, data.n_obs,
             data.n_missing, truth_path)
    return EXIT_OK


def cmd_fit(args) -> int:
    prior = _load(args.prior, PriorConfig)
    try:
        mcmc = McmcConfig(args.chains, args.iters, args.burnin, args.thin, args.seed)
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from None
    draws_path, summary_path = f"{args.out}.draws.csv", f"{args.out}.summary.json"
    _prefix_dir(args.out)
    _require_distinct([args.data, args.prior], [draws_path, summary_path])
    try:
        data = data_io.read_dataset(args.data)
    except (data_io.ParseError, OSError, ValueError) as exc:
        raise CliError(EXIT_DATA, f"cannot read dataset: {exc}") from None
    try:
        draws = fit(data, prior, mcmc)
    except PriorIncompatibleError as exc:
        raise CliError(EXIT_PRIOR, str(exc)) from None
    except DataPreconditionError as exc:
        raise CliError(EXIT_DATA, str(exc)) from None
    est = posterior_estimands(draws)
    summary = {
        "estimands": summarize(est.as_columns(), est.chain),
        "parameters": summarize(draws.columns, draws.chain),
        "n_draws": len(draws),
        "mcmc": {"chains": mcmc.chains, "iterations": mcmc.iterations,
                 "burnin": mcmc.burnin, "thin": mcmc.thin, "seed": mcmc.seed},
    }
    data_io.write_draws(draws, draws_path)
    data_io.write_summary(summary, summary_path)
    for name, row in summary["estimands"].items():
        lo, hi = row["ci95"]
        print(f"{name}: {row['median']:.4f} ({lo:.4f}, {hi:.4f})")
    return EXIT_OK


def cmd_impute(args) -> int:
    _prefix_dir(args.out)
    outputs = [f"{args.out}.imp-{k}.csv" for k in range(1, args.m + 1)]
    _require_distinct([args.data, args.draws], outputs)
    try:
        data = data_io.read_dataset(args.data)
        draws = data_io.read_draws(args.draws)
    except (data_io.ParseError, OSError, ValueError) as exc:
        raise CliError(EXIT_DATA, f"cannot read inputs: {exc}") from None
    try:
        completed = impute(data, draws, args.m, args.seed)
    except DataPreconditionError as exc:
        raise CliError(EXIT_DATA, str(exc)) from None
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from None
    for ds, path in zip(completed, outputs):
        data_io.write_dataset(ds, path)
    return EXIT_OK


def oracle_report(process: TukeyProcess, cfg: QuadratureConfig | None = None) -> dict:
    """Largest closed-form vs quadrature discrepancies for one model."""
    from .core import complete_moments

    model = process.model
    obs, mech, q = model.obs, model.mech, model.q
    report = {"q": abs(q - q_quadrature(obs, mech, cfg))}
    lo = hi = 0.0
    if obs.K:
        lo = float(np.min(obs.means - 10 * obs.sds))
        hi = float(np.max(obs.means + 10 * obs.sds))
    if obs.M:
        lo, hi = min(lo, obs.atom_locs.min()), max(hi, obs.atom_locs.max())
    grid = np.union1d(np.linspace(lo, hi, 1001), obs.atom_locs)
    from .expfam import mixture_log_density

    closed = np.exp(mixture_log_density(missing_model(obs, mech), grid))
    report["missing_density"] = float(np.max(np.abs(
        closed - missing_density_pointwise(obs, mech, q, grid))))
    cm, csd = complete_moments(model)
    om, osd = moments_quadrature(model, cfg)
    report["complete_mean"] = abs(cm - om)
    report["complete_sd"] = abs(csd - osd)
    return report


def cmd_oracle_check(args) -> int:
    try:
        process = data_io.read_process(args.config)
    except (data_io.ConfigError, OSError) as exc:
        raise CliError(EXIT_CONFIG, f"invalid config {args.config}: {exc}") from None
    if not isinstance(process, TukeyProcess):
        raise CliError(EXIT_CONFIG, "oracle-check needs a Tukey-specified process")
    try:
        report = oracle_report(process)
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from None
    for name, err in report.items():
        status = "ok" if err < ORACLE_TOL else "FAIL"
        print(f"{name:16s} max|closed - oracle| = {err:.3e}  {status}")
    worst = max(report, key=report.get)
    if report[worst] >= ORACLE_TOL:
        print(f"worst offender: {worst} ({report[worst]:.3e} >= {ORACLE_TOL:g})",
              file=sys.stderr)
        return EXIT_ORACLE
    return EXIT_OK


def cmd_replicate(args) -> int:
    from .studies import QUANTILE_COLUMNS, run_robust42, run_sim41

    out = Path(args.out)
    if not out.is_dir():
        raise CliError(EXIT_CONFIG, f"output directory {str(out)!r} does not exist")
    mcmc = McmcConfig(args.chains, args.iters, args.burnin, args.thin, args.seed)
    if args.study == "sim41":
        rows = run_sim41(args.seed, mcmc)
        cols = ["N", "estimand", *QUANTILE_COLUMNS, "truth"]
        for N in dict.fromkeys(r["N"] for r in rows):
            data_io.write_table([r for r in rows if r["N"] == N], cols, out / f"sim41_N{N}.csv")
        data_io.write_table(rows, cols, out / "sim41.csv")
    else:
        rows = run_robust42(args.seed, mcmc, reps=args.reps)
        cols = ["n", "K", "b1", "rep", "estimand", *QUANTILE_COLUMNS, "truth",
                "observed_estimate", "abs_error"]
        cells = dict.fromkeys((r["n"], r["b1"]) for r in rows)
        for n, b1 in cells:
            data_io.write_table([r for r in rows if (r["n"], r["b1"]) == (n, b1)], cols,
                                out / f"robust42_n{n}_b{b1:g}.csv")
        data_io.write_table(rows, cols, out / "robust42.csv")
        summary = []
        for n, b1 in cells:
            for name in ("complete_mean", "complete_sd"):
                errs = [r["abs_error"] for r in rows
                        if (r["n"], r["b1"], r["estimand"]) == (n, b1, name)]
                summary.append({"n": n, "b1": b1, "estimand": name,
                                "median_abs_error": float(np.median(errs))})
        data_io.write_table(summary, ["n", "b1", "estimand", "median_abs_error"],
                            out / "robust42_summary.csv")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tukeymiss", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a dataset and its truth record")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True, help="output prefix")
    s.set_defaults(func=cmd_simulate)

    d = McmcConfig()
    f = sub.add_parser("fit", help="posterior draws and summary")
    f.add_argument("--data", required=True)
    f.add_argument("--prior", required=True)
    f.add_argument("--chains", type=int, default=d.chains)
    f.add_argument("--iters", type=int, default=d.iterations)
    f.add_argument("--burnin", type=int, default=d.burnin)
    f.add_argument("--thin", type=int, default=d.thin)
    f.add_argument("--seed", type=int, required=True)
    f.add_argument("--out", required=True, help="output prefix")
    f.set_defaults(func=cmd_fit)

    i = sub.add_parser("impute", help="multiple imputation from posterior draws")
    i.add_argument("--data", required=True)
    i.add_argument("--draws", required=True)
    i.add_argument("--m", type=int, required=True)
    i.add_argument("--seed", type=int, required=True)
    i.add_argument("--out", required=True, help="output prefix")
    i.set_defaults(func=cmd_impute)

    o = sub.add_parser("oracle-check", help="compare closed forms with quadrature")
    o.add_argument("--config", required=True)
    o.set_defaults(func=cmd_oracle_check)

    r = sub.add_parser("replicate", help="run a simulation study")
    r.add_argument("--study", choices=["sim41", "robust42"], required=True)
    r.add_argument("--seed", type=int, required=True)
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--reps", type=int, default=1, help="replications per robust42 cell")
    r.add_argument("--chains", type=int, default=2)
    r.add_argument("--iters", type=int, default=2000)
    r.add_argument("--burnin", type=int, default=1000)
    r.add_argument("--thin", type=int, default=1)
    r.set_defaults(func=cmd_replicate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
