"""Command-line entry point: check, sample, analyze, verify, oracle.

Exit codes: 0 pass, 1 mathematical failure, 2 outside the uniqueness region,
64 configuration error, 65 data error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .analysis import (BoundReport, CovarianceSeries, NoSignal, OutsideUniqueness,
                       check_decay_bound, check_moment_bounds, displacement_ball,
                       estimate_covariances, fit_decay_rate, observable, run_battery)
from .analysis.covariance import MIN_RECORDS, SIGNAL_SIGMAS
from .analysis.verify import QUAD_RTOL
from .lattice import (ConditionFailure, NotGaussian, Semimetric, gaussian_covariance_oracle,
                      uniqueness_threshold)
from .numerics.density import NonConvergentError
from .numerics.maximize import DivergentSupError
from .potentials import RATIO_TOL, check_conditions
from .rundir import (CONFIG, COV, META, REPORT, SAMPLES, ConfigError, DataError, RunConfig,
                     atomic_write_text, load_checkpoint, load_config,
                     prepare_out_dir, read_json, read_samples, save_checkpoint, write_field,
                     write_json, write_samples)
from .sampler import kernel
from .sampler.chain import ChainError, CompiledModel, model_hash, run_chain

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_NOT_UNIQUE = 2
EXIT_CONFIG = 64
EXIT_DATA = 65

TOLERANCES = {
    "interaction_ratio_tol": RATIO_TOL,
    "density_tail_tol": kernel.TAIL_TOL,
    "sampler_cdf_rtol": kernel.CDF_RTOL,
    "quadrature_rtol": QUAD_RTOL,
    "signal_sigmas": SIGNAL_SIGMAS,
    "min_records": MIN_RECORDS,
    "pass_rule": "lhs <= rhs + 3*stat_error + num_error",
}


def _envelope(cfg: Optional[RunConfig], extra: Optional[dict] = None) -> dict:
    out = {"tool": "latgibbs", "version": __version__, "tolerances": dict(TOLERANCES)}
    if cfg is not None:
        out["config_digest"] = cfg.digest
    if extra:
        out.update(extra)
    return out


def _emit(obj, out: Optional[Path], name: str) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if out is not None:
        out = Path(out)
        target = out / name if out.is_dir() or not out.suffix else out
        write_json(target, obj)
    print(text)


def _metric(cfg: RunConfig, alpha: Optional[float]) -> Semimetric:
    if alpha is None:
        return cfg.metric
    try:
        return Semimetric(float(alpha))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _uniqueness(cfg: RunConfig, metric: Semimetric):
    """(condition report, Dobrushin report or None)."""
    cond = check_conditions(cfg.model)
    if not cond.ok:
        return cond, None
    return cond, uniqueness_threshold(cfg.model, metric, cond)


# --- check ---------------------------------------------------------------------

def cmd_check(args) -> int:
    cfg = load_config(args.config)
    metric = _metric(cfg, args.alpha)
    cond, dob = _uniqueness(cfg, metric)
    report = _envelope(cfg, {"command": "check", "conditions": cond.to_json(),
                             "dobrushin": dob.to_json() if dob else None})
    _emit(report, args.out, REPORT)
    if dob is None:
        print("conditions failed: " + "; ".join(cond.notes[1:]), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK if dob.unique else EXIT_NOT_UNIQUE


# --- sample --------------------------------------------------------------------

def _meta(cfg: RunConfig, cm: CompiledModel, state, n_records: int, dob) -> dict:
    s = cfg.sampler
    return {
        "tool": "latgibbs", "version": __version__, "config_digest": cfg.digest,
        "seed": s.seed, "sweeps": state.sweep, "burnin": s.burnin, "thin": s.thin,
        "order": s.order, "model_hash": cm.hash, "n_records": n_records,
        "n_sites": cm.lattice.n_sites, "extents": list(cm.lattice.extents),
        "lambda_gamma_d": dob.lam_gamma if dob else None,
        "outside_uniqueness": (not dob.unique) if dob else None,
        "tolerances": {"density_tail_tol": kernel.TAIL_TOL, "sampler_cdf_rtol": kernel.CDF_RTOL},
    }


def cmd_sample(args) -> int:
    if args.resume:
        run = Path(args.out)
        cfg = load_config(run / CONFIG)
    else:
        if args.config is None:
            raise ConfigError("--config is required")
        cfg = load_config(args.config)
    if cfg.sampler is None:
        raise ConfigError("config has no 'sampler' section")
    cond, dob = _uniqueness(cfg, cfg.metric)
    if dob is None:
        print("conditions failed; refusing to sample: " + "; ".join(cond.notes[1:]), file=sys.stderr)
        return EXIT_FAIL
    if not dob.unique:
        print("warning: lambda*gamma_d = %.4g is outside the uniqueness region" % dob.lam_gamma,
              file=sys.stderr)
    s = cfg.sampler
    cm = CompiledModel(cfg.model, cfg.lattice)
    total = s.sweeps if args.sweeps is None else int(args.sweeps)
    if args.resume:
        state = load_checkpoint(run, cfg.lattice)
        if state.model_hash != cm.hash:
            raise DataError("checkpoint/model hash mismatch")
        if total <= state.sweep:
            raise ConfigError("nothing to do: checkpoint is at sweep %d" % state.sweep)
        prev = read_json(run / META)
        n_prev = int(prev.get("n_records", 0))
    else:
        run = prepare_out_dir(args.out, args.force)
        write_json(run / CONFIG, cfg.raw)
        state = None
        n_prev = 0
    if not total > s.burnin:
        raise ConfigError("need sweeps > burnin")
    res = run_chain(cfg.model, cfg.lattice, total, burnin=s.burnin, thin=s.thin, seed=s.seed,
                    order=s.order, state=state)
    write_samples(run / SAMPLES, res.sweeps, res.fields, append=bool(args.resume))
    end = res.state
    write_field(run / ("field_%d.bin" % end.sweep), end.field,
                {"extents": list(cfg.lattice.extents), "sweep": end.sweep, "seed": end.seed,
                 "model_hash": end.model_hash})
    save_checkpoint(run, end, cfg.lattice)
    write_json(run / META, _meta(cfg, cm, end, n_prev + len(res.sweeps), dob))
    print("wrote %d records to %s (sweep %d)" % (len(res.sweeps), run / SAMPLES, end.sweep))
    return EXIT_OK


# --- analyze -------------------------------------------------------------------

def _base_site(cfg: RunConfig) -> int:
    if cfg.analysis.base_site is not None:
        return int(cfg.analysis.base_site)
    return cfg.lattice.index([L // 2 for L in cfg.lattice.extents])


def _displacements(cfg: RunConfig, R: int, base: int):
    lat = cfg.lattice
    if lat.boundary == "torus":
        if any(2 * R >= L for L in lat.extents):
            raise ConfigError("max displacement %d aliases on a torus of extent %s" % (R, lat.extents))
        return displacement_ball(lat.dim, R)
    c = np.unravel_index(base, lat.shape)
    return [k for k in displacement_ball(lat.dim, R)
            if all(0 <= a + b < L for a, b, L in zip(c, k, lat.extents))]


def cov_csv(series: CovarianceSeries, alpha: float, included) -> str:
    lines = ["displacement,cov,stderr,weight,included_in_fit"]
    w = series.weights(alpha)
    for m, k in enumerate(series.displacements):
        lines.append("%s,%.17g,%.17g,%.17g,%d" % (";".join(map(str, k)), series.cov[m],
                                                  series.stderr[m], w[m], int(included[m])))
    return "\n".join(lines) + "\n"


def read_oracle_csv(path) -> dict:
    out = {}
    try:
        with open(path) as fh:
            head = fh.readline().strip().split(",")
            if head[:2] != ["displacement", "cov"]:
                raise DataError("%s: bad oracle header" % path)
            for line in fh:
                if line.strip():
                    d, c = line.strip().split(",")[:2]
                    out[tuple(int(a) for a in d.split(";"))] = float(c)
    except (OSError, ValueError) as exc:
        raise DataError("cannot read oracle %s: %s" % (path, exc)) from None
    return out


def oracle_reports(series: CovarianceSeries, oracle: dict) -> List[BoundReport]:
    out = []
    for m, k in enumerate(series.displacements):
        if k in oracle:
            diff = abs(series.cov[m] - oracle[k])
            out.append(BoundReport("oracle:" + ";".join(map(str, k)), diff, 0.0, float(series.stderr[m]),
                                   0.0, {"sampled": float(series.cov[m]), "oracle": oracle[k]}))
    return out


def cmd_analyze(args) -> int:
    run = Path(args.run_dir)
    cfg = load_config(run / CONFIG)
    meta = read_json(run / META)
    if meta.get("model_hash") != model_hash(cfg.model, cfg.lattice):
        raise DataError("meta.json does not match config.json")
    _, fields = read_samples(run / SAMPLES, cfg.lattice.n_sites)
    metric = _metric(cfg, args.alpha)
    R = cfg.analysis.max_displacement if args.max_displacement is None else int(args.max_displacement)
    base = _base_site(cfg)
    obs = observable(cfg.analysis.observable, base)
    disps = _displacements(cfg, R, base)
    series = estimate_covariances(fields, cfg.lattice, obs, obs, disps, cfg.analysis.n_batches)
    try:
        fit = fit_decay_rate(series)
        fit_json = {"status": "ok", "rate": fit.rate, "intercept": fit.intercept,
                    "r_squared": fit.r_squared, "excluded": [list(k) for k in fit.excluded]}
        included = fit.included
    except NoSignal as exc:
        fit_json = {"status": "no signal", "message": str(exc)}
        included = np.zeros(len(series.displacements), dtype=bool)
    atomic_write_text(run / COV, cov_csv(series, metric.alpha, included))

    reports: List[BoundReport] = []
    skipped = {}
    try:
        reports.append(check_decay_bound(series, cfg.model, metric, obs, obs))
    except (OutsideUniqueness, ConditionFailure) as exc:
        skipped["decay_bound"] = str(exc)
    reports += check_moment_bounds(fields, cfg.model.F.epsilon, cfg.analysis.a, cfg.model.F,
                                   cfg.analysis.n_batches)
    if args.against_oracle:
        if cfg.analysis.observable != "x":
            raise ConfigError("--against-oracle needs analysis.observable = 'x'")
        reports += oracle_reports(series, read_oracle_csv(args.against_oracle))

    old = {}
    if (run / REPORT).exists():
        old = read_json(run / REPORT)
    old.update(_envelope(cfg, {
        "analysis": {"observable": obs.label, "base_site": base, "alpha": metric.alpha,
                     "max_displacement": R, "n_records": int(fields.shape[0]),
                     "decay_fit": fit_json, "skipped": skipped},
        "bounds": [r.to_json() for r in reports],
    }))
    write_json(run / REPORT, old)
    for r in reports:
        print(r.line())
    print("decay fit: " + json.dumps(fit_json))
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


# --- verify --------------------------------------------------------------------

def cmd_verify(args) -> int:
    cfg = load_config(args.config)
    try:
        reports = run_battery(cfg.model)
    except (DivergentSupError, NonConvergentError, ValueError) as exc:
        print("verification failed: %s" % exc, file=sys.stderr)
        return EXIT_FAIL
    payload = [r.to_json() for r in reports]
    if args.out is not None:
        out = Path(args.out)
        target = out / "verify.json" if out.is_dir() or not out.suffix else out
        write_json(target, payload)
    for r in reports:
        print(r.line())
    failed = [r.name for r in reports if not r.passed]
    if failed:
        print("failing: " + ", ".join(failed), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


# --- oracle --------------------------------------------------------------------

def oracle_csv(cfg: RunConfig, R: int) -> str:
    cov = gaussian_covariance_oracle(cfg.model, cfg.lattice)
    lat = cfg.lattice
    base = _base_site(cfg)
    disps = _displacements(cfg, R, base)
    nb = lat.neighbor_table(disps)
    lines = ["displacement,cov"]
    for m, k in enumerate(disps):
        if lat.boundary == "torus":
            v = float(np.mean(cov[np.arange(lat.n_sites), nb[:, m]]))
        else:
            v = float(cov[base, nb[base, m]])
        lines.append("%s,%.17g" % (";".join(map(str, k)), v))
    return "\n".join(lines) + "\n"


def cmd_oracle(args) -> int:
    cfg = load_config(args.config)
    R = cfg.analysis.max_displacement if args.max_displacement is None else int(args.max_displacement)
    try:
        text = oracle_csv(cfg, R)
    except NotGaussian as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_FAIL
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# --- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="latgibbs", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version="%(prog)s " + __version__)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="conditions A-C and the uniqueness threshold")
    c.add_argument("--config", required=True)
    c.add_argument("--out", help="directory (report.json) or file for the report")
    c.add_argument("--alpha", type=float, help="override metric.alpha")
    c.set_defaults(func=cmd_check)

    s = sub.add_parser("sample", help="run the heat-bath chain into a run directory")
    s.add_argument("--config")
    s.add_argument("--out", required=True, help="run directory")
    s.add_argument("--force", action="store_true", help="overwrite a non-empty run directory")
    s.add_argument("--resume", action="store_true", help="continue from the run's checkpoint")
    s.add_argument("--sweeps", type=int, help="total sweep count (overrides the config)")
    s.set_defaults(func=cmd_sample)

    a = sub.add_parser("analyze", help="covariances, decay fit and bound checks for a run")
    a.add_argument("run_dir")
    a.add_argument("--max-displacement", type=int)
    a.add_argument("--alpha", type=float, help="override metric.alpha")
    a.add_argument("--against-oracle", metavar="PATH", help="oracle CSV from 'latgibbs oracle'")
    a.set_defaults(func=cmd_analyze)

    v = sub.add_parser("verify", help="quadrature checks of the one-site inequalities")
    v.add_argument("--config", required=True)
    v.add_argument("--out", help="directory (verify.json) or file")
    v.set_defaults(func=cmd_verify)

    o = sub.add_parser("oracle", help="exact Gaussian covariances by dense inversion")
    o.add_argument("--config", required=True)
    o.add_argument("--out", help="CSV path (stdout if omitted)")
    o.add_argument("--max-displacement", type=int)
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ChainError) as exc:
        print("data error: %s" % exc, file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        # InsufficientSamples and similar data-shape problems
        print("data error: %s" % exc, file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
