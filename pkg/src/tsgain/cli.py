"""Command-line experiment runner.

Subcommands:
  simulate CONFIG   run the closed loop, write the trace CSV, print a summary
  check CONFIG      audit assumptions, detectability, certificates, reports
  analyze TRACE     recompute convergence/decay metrics from a trace CSV

Exit codes: 0 ok, 2 config or trace format error, 3 assumption failure,
4 numeric blow-up (partial trace is still written).  The TSGAIN_OUT_DIR
environment variable redirects output files to another directory (the
directory only; file names are kept).
"""

from __future__ import annotations

import argparse
import importlib.resources
import json
import os
import sys
from pathlib import Path

import numpy as np

from .analysis import (
    StabilityReport,
    check_assumptions,
    contraction_certificate,
    detectability_check,
    generalized_lyapunov_residual,
    positive_real_diagnostic,
)
from .errors import AssumptionError, ConfigError, TraceFormatError
from .matfun import expc, solve_lyapunov_continuous
from .scenario import ScenarioConfig, load_config, parse_config, run_scenario, summarize
from .trace import SimulationTrace

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ASSUMPTION = 3
EXIT_BLOWUP = 4

_POLICY_SPECIFIC_KEYS = {"eps1", "cb", "c_safe", "mu_init", "mu"}


def _resolve_config_path(arg: str) -> Path:
    """Accept a filesystem path or the name of a bundled scenario."""
    p = Path(arg)
    if p.exists():
        return p
    scenarios = importlib.resources.files("tsgain") / "scenarios"
    for candidate in (arg, f"{arg}.json"):
        res = scenarios / candidate
        if res.is_file():
            return Path(str(res))
    raise ConfigError(f"config not found: {arg}")


def _resolve_out(path: str) -> Path:
    out_dir = os.environ.get("TSGAIN_OUT_DIR")
    if out_dir:
        return Path(out_dir) / Path(path).name
    return Path(path)


def _load_with_overrides(args) -> ScenarioConfig:
    path = _resolve_config_path(args.config)
    if args.policy is None and args.horizon is None and args.seed is None:
        cfg = load_config(path)
    else:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})"
            ) from exc
        if args.horizon is not None:
            data.setdefault("run", {})["horizon"] = args.horizon
        if args.seed is not None:
            data.setdefault("controller", {})["seed"] = args.seed
        if args.policy is not None:
            controller = data.setdefault("controller", {})
            for key in _POLICY_SPECIFIC_KEYS & set(controller):
                del controller[key]
            controller["policy"] = args.policy
        cfg = parse_config(data)
    return cfg


def _print_summary(summary: dict):
    for key in sorted(summary):
        value = summary[key]
        if isinstance(value, float):
            print(f"{key} = {value:.12g}")
        else:
            print(f"{key} = {value}")


def cmd_simulate(args) -> int:
    cfg = _load_with_overrides(args)
    out_path = _resolve_out(args.out or cfg.out)
    try:
        result = run_scenario(cfg)
    except AssumptionError as exc:
        print(f"assumption failure: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    result.trace.write_csv(out_path)
    print(f"trace written to {out_path} ({len(result.trace)} records)")
    _print_summary(result.summary)
    if result.blew_up:
        print(
            f"numeric blow-up: state norm exceeded {cfg.blowup_norm:.3g}; partial trace flushed",
            file=sys.stderr,
        )
        return EXIT_BLOWUP
    return EXIT_OK


def build_check_report(cfg: ScenarioConfig, mu_list=None) -> StabilityReport:
    """Structural audit of a scenario: assumptions, aliasing, certificates,
    positive-real diagnostics, and Lyapunov residual spot checks."""
    plant = cfg.plant
    settings = cfg.check
    mus = tuple(mu_list) if mu_list else settings.mu_list
    report = StabilityReport(assumptions=check_assumptions(plant))
    report.detectability = tuple(
        detectability_check(plant.A, mu, tol=settings.detectability_tol) for mu in mus
    )
    rows = []
    for k in settings.lattice_k:
        ceiling = cfg.policy.ceiling(k)
        for frac in settings.lattice_mu_fractions:
            mu = frac * ceiling
            cb_hat = plant.C @ expc(mu * plant.A) @ plant.B
            cert = contraction_certificate(cb_hat, k, mu)
            rows.append((k, mu, cert.eps2))
    report.certificates = tuple(rows)
    report.positive_real = tuple(
        positive_real_diagnostic(plant, k_star) for k_star in settings.k_star_list
    )
    residual_mu0 = []
    residual_sampled = []
    eye = np.eye(plant.n)
    for rep in report.positive_real:
        if not rep.passes:
            continue
        closed = plant.A - rep.k_star * (plant.B @ plant.C)
        p = solve_lyapunov_continuous(closed, eye)
        residual_mu0.append(generalized_lyapunov_residual(closed, p, eye, 0.0))
        for mu in mus:
            residual_sampled.append(generalized_lyapunov_residual(closed, p, eye, mu))
    if residual_mu0:
        report.lyapunov_residuals = {
            "solved_gains": len(residual_mu0),
            "mu0_max": max(residual_mu0),
            "sampled_mu_max": max(residual_sampled) if residual_sampled else 0.0,
        }
    return report


def cmd_check(args) -> int:
    cfg = _load_with_overrides(args)
    report = build_check_report(cfg, mu_list=args.mu or None)
    print(report.to_text())
    out_name = args.out or f"{Path(args.config).stem}_check.kv"
    out_path = _resolve_out(out_name)
    with open(out_path, "w") as fh:
        for key, value in report.key_values().items():
            fh.write(f"{key}={value}\n")
    print(f"report written to {out_path}")
    if report.assumptions is not None and not report.assumptions.a2_pass:
        print("assumption failure: CB + (CB)^T is not positive definite", file=sys.stderr)
        return EXIT_ASSUMPTION
    return EXIT_OK


def cmd_analyze(args) -> int:
    trace = SimulationTrace.read_csv(args.trace)
    trace.validate()
    summary = summarize(trace)
    summary["realized_alpha"] = _realized_decay(trace)
    _print_summary(summary)
    if args.out:
        out_path = _resolve_out(args.out)
        with open(out_path, "w") as fh:
            for key in sorted(summary):
                fh.write(f"{key}={summary[key]}\n")
        print(f"report written to {out_path}")
    return EXIT_OK


def _realized_decay(trace: SimulationTrace) -> float:
    """Decay exponent of the realized ||x(t)|| path (log-norm slope proxy).

    Scattered records contribute log of the norm ratio across the jump,
    dense pairs the log-norm increment; the whole-horizon mean telescopes
    to -(log||x(T)|| - log||x(t0)||) / (T - t0) where norms stay positive.
    """
    times = trace.times
    norms = trace.norms
    positive = norms > 0
    if not np.all(positive):
        # stop at the first zero norm; the proxy is undefined past it
        cut = int(np.argmin(positive))
        if cut < 2:
            return float("inf")
        times, norms = times[:cut], norms[:cut]
    span = times[-1] - times[0]
    if span <= 0:
        return 0.0
    return float(-(np.log(norms[-1]) - np.log(norms[0])) / span)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tsgain",
        description="High-gain adaptive output feedback on mixed continuous/discrete time domains",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a closed-loop scenario and write its trace")
    sim.add_argument("config", help="scenario JSON path or bundled scenario name")
    sim.add_argument("--horizon", type=float, default=None, help="override run.horizon")
    sim.add_argument("--seed", type=int, default=None, help="override controller.seed")
    sim.add_argument("--out", default=None, help="override the trace output path")
    sim.add_argument("--policy", default=None, help="override the graininess policy by name")
    sim.set_defaults(func=cmd_simulate)

    chk = sub.add_parser("check", help="audit assumptions and stability diagnostics")
    chk.add_argument("config", help="scenario JSON path or bundled scenario name")
    chk.add_argument("--mu", type=float, action="append", default=None,
                     help="graininess to test for detectability (repeatable)")
    chk.add_argument("--out", default=None, help="key-value report path")
    chk.add_argument("--horizon", type=float, default=None, help=argparse.SUPPRESS)
    chk.add_argument("--seed", type=int, default=None, help=argparse.SUPPRESS)
    chk.add_argument("--policy", default=None, help="override the graininess policy by name")
    chk.set_defaults(func=cmd_check)

    ana = sub.add_parser("analyze", help="recompute metrics from a trace CSV")
    ana.add_argument("trace", help="trace CSV path")
    ana.add_argument("--out", default=None, help="key-value report path")
    ana.set_defaults(func=cmd_analyze)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TraceFormatError as exc:
        print(f"trace error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AssumptionError as exc:
        print(f"assumption failure: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION


if __name__ == "__main__":
    sys.exit(main())
