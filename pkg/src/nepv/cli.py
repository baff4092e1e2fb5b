"""Command-line harness: single SCF runs, rate reports and parameter sweeps.

Examples
--------
::

    nepv solve --problem ks --alpha 0.5 --out history.csv
    nepv rates --problem gpe --beta 3.5 --potential radial --out rates.json
    nepv sweep --problem ks --alpha 1 --sweep-param sigma --from 0.05 --to 50 --steps 100 \\
        --spacing log --out sigma.csv
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .analysis import (
    eta_czbl,
    local_operator,
    operator_norm_frobenius,
    optimal_sigma,
    q_extremes,
    realify,
    rho_sigma_bound,
    sigma_lower_bound,
    spectral_radius,
)
from .errors import CertificationFailed, InsufficientHistory, NepvError, NonPositiveError
from .problems import GpeParams, KohnShamParams, NepvProblem, gpe, kohn_sham
from .scf import IterationHistory, ScfOptions, SolutionCertificate, Status, certify, observed_rate, scf_iterate

log = logging.getLogger("nepv")

SWEEP_COLUMNS = ["param_value", "eta_sup_infty", "eta_sup", "eta_czbl", "observed", "rho_sigma_bound", "status"]
HISTORY_COLUMNS = ["iter", "residual", "gap", "subspace_error"]
RATE_FIELDS = [
    "eta_sup_infty",
    "eta_sup",
    "eta_czbl",
    "observed",
    "delta_star",
    "s_star",
    "mu_min",
    "mu_max",
    "sigma_used_for_truth",
]

EXIT_CODES = {
    Status.CONVERGED: 0,
    Status.MAX_ITER: 3,
    Status.DIVERGED: 3,
    Status.GAP_COLLAPSE: 4,
}


@dataclass(frozen=True)
class RunConfig:
    problem: str = "ks"
    n: int = 10
    k: int = 2
    alpha: float = 1.0
    grid_n: int = 10
    ell: float = 1.0
    omega: float = 0.85
    beta: float = 1.0
    potential: str = "radial"
    sigma: float = 0.0
    tol: float = 1e-13
    max_iter: int = 5000
    seed: int = 0
    window: int = 30
    observed: bool = True

    def build(self) -> NepvProblem:
        if self.problem == "ks":
            return kohn_sham(KohnShamParams(n=self.n, k=self.k, alpha=self.alpha))
        if self.problem == "gpe":
            return gpe(
                GpeParams(N=self.grid_n, ell=self.ell, omega=self.omega, beta=self.beta, potential=self.potential)
            )
        raise ValueError(f"unknown problem {self.problem!r}")

    def options(self, sigma: Optional[float] = None, **kw) -> ScfOptions:
        kw.setdefault("max_iter", self.max_iter)
        return ScfOptions(tol_residual=self.tol, sigma=self.sigma if sigma is None else sigma, **kw)


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        if math.isnan(x):
            return "nan"
        return format(float(x), ".17g")
    return str(x)


def _jsonable(x):
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def fitted_rate(history: IterationHistory, window: int) -> Optional[float]:
    if not history.converged:
        return None
    try:
        return observed_rate(history, window=window)
    except NonPositiveError:
        return 0.0
    except InsufficientHistory:
        return None


def ground_truth(problem: NepvProblem, config: RunConfig) -> tuple[SolutionCertificate, IterationHistory, float]:
    """Certified solution plus the run at the configured shift.

    SCF is run at ``config.sigma`` first; if it fails to converge, level-shifted
    SCF at the problem's a-priori shift supplies the solution. Returns the
    certificate, the configured-shift history and the shift that produced the
    certified solution.
    """
    V0 = problem.start(config.seed)
    hist = scf_iterate(problem, V0, config.options())
    sigma_truth = config.sigma
    V = hist.V
    if not hist.converged:
        if problem.apriori_sigma is None:
            raise CertificationFailed(f"SCF did not converge ({hist.status}) and no fallback shift is known")
        sigma_truth = problem.apriori_sigma
        log.info("%s: status %s at sigma=%g, falling back to sigma=%g", problem.label, hist.status, config.sigma, sigma_truth)
        fallback = scf_iterate(problem, V0, config.options(sigma_truth, max_iter=max(config.max_iter, 50_000)))
        if not fallback.converged:
            raise CertificationFailed(f"level-shifted SCF at sigma={sigma_truth:g} ended with {fallback.status}")
        V = fallback.V
    try:
        cert = certify(problem, V, cert_tol=max(10 * config.tol, 1e-12))
    except NepvError as exc:
        raise CertificationFailed(str(exc)) from exc
    return cert, hist, sigma_truth


def observed_at(problem: NepvProblem, config: RunConfig, cert: SolutionCertificate, sigma: float) -> tuple[Optional[float], Status]:
    """Re-run SCF at `sigma` recording subspace errors against `cert` and fit the rate."""
    hist = scf_iterate(problem, problem.start(config.seed), config.options(sigma, reference=cert))
    return fitted_rate(hist, config.window), hist.status


def compute_rates(config: RunConfig) -> tuple[dict, SolutionCertificate, Status]:
    """Rate report for one configuration, its certificate and the SCF status at ``config.sigma``."""
    problem = config.build()
    cert, hist, sigma_truth = ground_truth(problem, config)
    observed = None
    if hist.converged and config.observed:
        observed, _ = observed_at(problem, config, cert, config.sigma)
    L = realify(local_operator(problem, cert, config.sigma))
    try:
        mu_min, mu_max = q_extremes(problem, cert)
    except NepvError:
        mu_min = mu_max = None
    report = {
        "eta_sup_infty": spectral_radius(L),
        "eta_sup": operator_norm_frobenius(L),
        "eta_czbl": eta_czbl(problem, cert),
        "observed": observed,
        "delta_star": cert.delta_star,
        "s_star": cert.s_star,
        "mu_min": mu_min,
        "mu_max": mu_max,
        "sigma_used_for_truth": sigma_truth,
    }
    return report, cert, hist.status


def _bound_or_none(mu, cert, sigma):
    if mu is None or mu[0] <= 0:
        return None
    return rho_sigma_bound(mu[0], mu[1], cert.delta_star, cert.s_star, sigma)


def _param_point(args) -> dict:
    config, param, value = args
    row = {"param_value": value}
    try:
        cfg = replace(config, **{param: value})
        report, cert, status = compute_rates(cfg)
        mu = None if report["mu_min"] is None else (report["mu_min"], report["mu_max"])
        row.update({k: report[k] for k in ("eta_sup_infty", "eta_sup", "eta_czbl", "observed")})
        row["rho_sigma_bound"] = _bound_or_none(mu, cert, cfg.sigma)
        row["status"] = str(status)
    except NepvError as exc:
        row["status"] = f"{type(exc).__name__}"
    return row


def _sigma_point(args) -> dict:
    config, cert, mu, value = args
    row = {"param_value": value}
    problem = config.build()
    try:
        L = realify(local_operator(problem, cert, value))
        row["eta_sup_infty"] = spectral_radius(L)
        row["eta_sup"] = operator_norm_frobenius(L)
        row["eta_czbl"] = eta_czbl(problem, cert)
        row["rho_sigma_bound"] = _bound_or_none(mu, cert, value)
        if config.observed:
            row["observed"], status = observed_at(problem, config, cert, value)
        else:
            status = scf_iterate(problem, problem.start(config.seed), config.options(value)).status
        row["status"] = str(status)
    except NepvError as exc:
        row["status"] = f"{type(exc).__name__}"
    return row


def sweep_grid(start: float, stop: float, steps: int, spacing: str = "linear") -> np.ndarray:
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if spacing == "log":
        if start <= 0 or stop <= 0:
            raise ValueError("log spacing needs a positive range")
        return np.geomspace(start, stop, steps)
    return np.linspace(start, stop, steps)


def run_sweep(config: RunConfig, param: str, values, jobs: int = 1) -> tuple[list[dict], dict]:
    """Evaluate every grid point; rows come back in grid order."""
    values = [float(v) for v in values]
    markers: dict = {"sweep_param": param}
    if param == "sigma":
        problem = config.build()
        cert, _, sigma_truth = ground_truth(problem, replace(config, sigma=0.0))
        try:
            mu = q_extremes(problem, cert)
        except NepvError:
            mu = None
        markers["sigma_used_for_truth"] = sigma_truth
        markers["delta_star"] = cert.delta_star
        markers["s_star"] = cert.s_star
        markers["sigma_apriori"] = problem.apriori_sigma
        if mu is not None:
            markers["mu_min"], markers["mu_max"] = mu
            markers["sigma_lower"] = sigma_lower_bound(mu[1], cert.delta_star)
            if mu[0] > 0:
                markers["sigma_optimal_bound"] = optimal_sigma(mu[0], mu[1], cert.delta_star, cert.s_star)
        tasks = [(config, cert, mu, v) for v in values]
        worker = _sigma_point
    elif (param == "alpha" and config.problem == "ks") or (param == "beta" and config.problem == "gpe"):
        tasks = [(config, param, v) for v in values]
        worker = _param_point
    else:
        raise ValueError(f"cannot sweep {param!r} for problem {config.problem!r}")

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(worker, tasks))
    else:
        rows = [worker(t) for t in tasks]

    finite = [r for r in rows if r.get("eta_sup_infty") is not None]
    if finite:
        best = min(finite, key=lambda r: r["eta_sup_infty"])
        markers["argmin_param"] = best["param_value"]
        markers["min_eta_sup_infty"] = best["eta_sup_infty"]
    return rows, markers


def history_csv(history: IterationHistory) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HISTORY_COLUMNS)
    errs = history.subspace_errors
    for i, res in enumerate(history.residuals):
        gap = history.gaps[i] if i < len(history.gaps) else None
        err = errs[i] if errs is not None else None
        w.writerow([i, fmt(res), fmt(gap), fmt(err)])
    return buf.getvalue()


def rows_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def _emit(text: str, out: Optional[str]) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=False) + "\n"


def cmd_solve(args, config: RunConfig) -> int:
    problem = config.build()
    reference = SolutionCertificate.load(args.certificate) if args.certificate else None
    hist = scf_iterate(problem, problem.start(config.seed), config.options(reference=reference))
    rate = fitted_rate(hist, config.window)
    if args.format == "json":
        text = _dump_json(
            {
                "status": str(hist.status),
                "iterations": hist.iterations,
                "observed": rate,
                "residual": hist.residuals,
                "gap": hist.gaps,
                "subspace_error": hist.subspace_errors,
            }
        )
    else:
        text = history_csv(hist)
    _emit(text, args.out)
    print(
        f"status={hist.status} iterations={hist.iterations} residual={fmt(hist.residuals[-1])} observed={fmt(rate)}",
        file=sys.stderr if args.out in (None, "-") else sys.stdout,
    )
    return EXIT_CODES[hist.status]


def cmd_rates(args, config: RunConfig) -> int:
    try:
        report, cert, _ = compute_rates(config)
    except CertificationFailed as exc:
        print(f"certification failed: {exc}", file=sys.stderr)
        return 5
    if args.save_certificate:
        cert.save(args.save_certificate)
    if args.format == "csv":
        text = rows_csv([report], RATE_FIELDS)
    else:
        text = _dump_json(report)
    _emit(text, args.out)
    return 0


def cmd_sweep(args, config: RunConfig) -> int:
    values = sweep_grid(args.start, args.stop, args.steps, args.spacing)
    rows, markers = run_sweep(config, args.sweep_param, values, jobs=args.jobs)
    if args.format == "json":
        _emit(_dump_json({"rows": rows, "markers": markers}), args.out)
    else:
        _emit(rows_csv(rows, SWEEP_COLUMNS), args.out)
        if args.out not in (None, "-"):
            with open(args.out + ".markers.json", "w") as fh:
                fh.write(_dump_json(markers))
    print(_dump_json(markers).strip(), file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("problem")
    g.add_argument("--problem", choices=["ks", "gpe"], default="ks")
    g.add_argument("--n", type=int, default=10, help="Kohn-Sham grid size")
    g.add_argument("--k", type=int, default=2, help="Kohn-Sham number of states")
    g.add_argument("--alpha", type=float, default=1.0)
    g.add_argument("--grid-n", type=int, default=10, help="GPE points per axis")
    g.add_argument("--ell", type=float, default=1.0)
    g.add_argument("--omega", type=float, default=0.85)
    g.add_argument("--beta", type=float, default=1.0)
    g.add_argument("--potential", choices=["radial", "nonradial"], default="radial")
    s = common.add_argument_group("iteration")
    s.add_argument("--sigma", type=float, default=0.0, help="level shift")
    s.add_argument("--tol", type=float, default=1e-13, help="residual tolerance")
    s.add_argument("--max-iter", type=int, default=5000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--window", type=int, default=30, help="least-squares window for the observed rate")
    o = common.add_argument_group("output")
    o.add_argument("--out", default=None, help="output file (default: stdout)")
    o.add_argument("--format", choices=["csv", "json"], default=None)
    o.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="nepv", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="run one SCF and write its history")
    p.add_argument("--certificate", default=None, help=".npz certificate for subspace errors")
    p.set_defaults(func=cmd_solve, default_format="csv")

    p = sub.add_parser("rates", parents=[common], help="convergence-rate report for one configuration")
    p.add_argument("--save-certificate", default=None, help="write the certified solution (.npz)")
    p.add_argument("--no-observed", dest="observed", action="store_false")
    p.set_defaults(func=cmd_rates, default_format="json")

    p = sub.add_parser("sweep", parents=[common], help="rate estimates over a parameter grid")
    p.add_argument("--sweep-param", choices=["alpha", "beta", "sigma"], required=True)
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--steps", type=int, default=41)
    p.add_argument("--spacing", choices=["linear", "log"], default="linear")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--no-observed", dest="observed", action="store_false")
    p.set_defaults(func=cmd_sweep, default_format="csv")
    return parser


def config_from_args(args) -> RunConfig:
    return RunConfig(
        problem=args.problem,
        n=args.n,
        k=args.k,
        alpha=args.alpha,
        grid_n=args.grid_n,
        ell=args.ell,
        omega=args.omega,
        beta=args.beta,
        potential=args.potential,
        sigma=args.sigma,
        tol=args.tol,
        max_iter=args.max_iter,
        seed=args.seed,
        window=args.window,
        observed=getattr(args, "observed", True),
    )


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format is None:
        args.format = args.default_format
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        config = config_from_args(args)
        config.build()
    except (ValueError, NepvError) as exc:
        parser.error(str(exc))
    return args.func(args, config)


if __name__ == "__main__":
    sys.exit(main())
