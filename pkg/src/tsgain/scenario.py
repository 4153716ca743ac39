"""Configuration-driven closed-loop simulation.

A scenario is a single JSON document with four sections: plant (matrices,
never defaulted), timescale (a blocking schedule or an explicit segment
program), controller (initial gain, graininess policy, optional wiggle),
and run (horizon, integration step, output).  The driver alternates dense
continuous control with scattered sampled steps, records every point into
a SimulationTrace, and never mutates shared state, so identical configs
reproduce byte-identical traces.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .analysis import (
    check_assumptions,
    envelope_fit,
    positive_real_diagnostic,
)
from .controller import (
    BlockingSchedule,
    ControllerState,
    FixedGraininess,
    GraininessPolicy,
    IlchmannTownley,
    MimoBound,
    RandomWiggle,
    RepeatingWiggle,
    SisoBound,
    default_eps1,
    make_repeating_wiggle,
    next_graininess,
)
from .errors import AssumptionError, ConfigError
from .matfun import sigma_decomposition
from .plant import LTIPlant, run_dense, step_scattered
from .timescale import DEFAULT_H_INT, Dense, Gap, TimeScaleProgram, realize
from .trace import SimulationTrace, TraceRecord

__all__ = ["ScenarioConfig", "CheckSettings", "SimulationResult", "load_config", "parse_config", "run_scenario"]

DEFAULT_BLOWUP_NORM = 1e12


@dataclass(frozen=True)
class CheckSettings:
    """Parameters for the `check` audit command."""

    mu_list: tuple = (0.5, 1.0, 2.0)
    k_star_list: tuple = (1.0, 2.0, 5.0, 10.0)
    lattice_k: tuple = (0.5, 1.0, 2.0, 4.0, 8.0)
    lattice_mu_fractions: tuple = (0.25, 0.5, 0.75, 0.9, 1.0)
    detectability_tol: float = 1e-6


@dataclass(frozen=True)
class ScenarioConfig:
    plant: LTIPlant
    mode: str  # "blocking" | "program"
    schedule: Optional[BlockingSchedule]
    program: Optional[TimeScaleProgram]
    policy: GraininessPolicy
    k0: float
    horizon: float
    h_int: float
    out: str
    seed: int
    blowup_norm: float
    check: CheckSettings = field(default_factory=CheckSettings)


def _require(mapping: dict, key: str, path: str):
    if key not in mapping:
        raise ConfigError(f"{path}.{key}: required field is missing")
    return mapping[key]


def _expect_mapping(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{path}: expected an object, got {type(value).__name__}")
    return value


def _reject_unknown(mapping: dict, allowed, path: str):
    unknown = set(mapping) - set(allowed)
    if unknown:
        raise ConfigError(f"{path}: unknown field(s) {sorted(unknown)}")


def _as_number(value, path: str, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    v = float(value)
    if positive and not v > 0:
        raise ConfigError(f"{path}: must be positive, got {v}")
    return v


def _as_matrix(value, path: str) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: not a numeric array ({exc})") from exc
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{path}: entries must be finite")
    return arr


def _parse_plant(section, path: str) -> LTIPlant:
    sec = _expect_mapping(section, path)
    _reject_unknown(sec, {"A", "B", "C", "x0"}, path)
    a = _as_matrix(_require(sec, "A", path), f"{path}.A")
    b = _as_matrix(_require(sec, "B", path), f"{path}.B")
    c = _as_matrix(_require(sec, "C", path), f"{path}.C")
    x0 = _as_matrix(_require(sec, "x0", path), f"{path}.x0")
    try:
        return LTIPlant(A=a, B=b, C=c, x0=x0)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_timescale(section, path: str):
    sec = _expect_mapping(section, path)
    mode = _require(sec, "mode", path)
    if mode == "blocking":
        _reject_unknown(sec, {"mode", "continuous_run", "block_cap_fraction"}, path)
        try:
            schedule = BlockingSchedule(
                continuous_run=_as_number(sec.get("continuous_run", 1.0), f"{path}.continuous_run"),
                block_cap_fraction=_as_number(
                    sec.get("block_cap_fraction", 0.9), f"{path}.block_cap_fraction"
                ),
            )
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return "blocking", schedule, None
    if mode == "program":
        _reject_unknown(sec, {"mode", "segments", "origin"}, path)
        raw_segments = _require(sec, "segments", path)
        if not isinstance(raw_segments, list) or not raw_segments:
            raise ConfigError(f"{path}.segments: expected a non-empty list")
        segments = []
        for i, raw in enumerate(raw_segments):
            seg_path = f"{path}.segments[{i}]"
            seg = _expect_mapping(raw, seg_path)
            if set(seg) == {"dense"}:
                segments.append(Dense(_as_number(seg["dense"], seg_path, positive=True)))
            elif set(seg) == {"gap"}:
                segments.append(Gap(_as_number(seg["gap"], seg_path, positive=True)))
            else:
                raise ConfigError(f'{seg_path}: expected {{"dense": d}} or {{"gap": b}}')
        origin = _as_number(sec.get("origin", 0.0), f"{path}.origin")
        return "program", None, TimeScaleProgram(segments, origin=origin)
    raise ConfigError(f'{path}.mode: expected "blocking" or "program", got {mode!r}')


def _parse_wiggle(section, path: str, plant: LTIPlant, seed: int):
    if section is None:
        return None
    sec = _expect_mapping(section, path)
    mode = _require(sec, "mode", path)
    if mode == "repeating":
        _reject_unknown(sec, {"mode", "values", "seed"}, path)
        if "values" in sec:
            values = sec["values"]
            if not isinstance(values, list) or not values:
                raise ConfigError(f"{path}.values: expected a non-empty list")
            try:
                return RepeatingWiggle(tuple(float(v) for v in values))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{path}.values: {exc}") from exc
        return make_repeating_wiggle(plant.n, int(sec.get("seed", seed)))
    if mode == "random":
        _reject_unknown(sec, {"mode", "resolution_bits", "seed"}, path)
        bits = sec.get("resolution_bits", 8)
        if not isinstance(bits, int) or isinstance(bits, bool) or bits < 1:
            raise ConfigError(f"{path}.resolution_bits: expected a positive integer")
        return RandomWiggle(resolution_bits=bits, seed=int(sec.get("seed", seed)))
    raise ConfigError(f'{path}.mode: expected "repeating" or "random", got {mode!r}')


_POLICY_KEYS = {
    "mimo_bound": {"eps1", "cb"},
    "siso_bound": {"c_safe", "cb"},
    "ilchmann_townley": {"mu_init"},
    "fixed": {"mu"},
}


def _parse_policy(sec: dict, path: str, plant: LTIPlant, wiggle, name: str) -> GraininessPolicy:
    if name not in _POLICY_KEYS:
        raise ConfigError(
            f"{path}.policy: unknown policy {name!r}; expected one of {sorted(_POLICY_KEYS)}"
        )
    try:
        if name == "mimo_bound":
            cb = _as_matrix(sec["cb"], f"{path}.cb") if "cb" in sec else plant.cb()
            eps1 = _as_number(sec["eps1"], f"{path}.eps1") if "eps1" in sec else None
            return MimoBound(cb=cb, eps1=eps1, wiggle=wiggle)
        if name == "siso_bound":
            cb = (
                float(np.asarray(_as_matrix(sec["cb"], f"{path}.cb")).reshape(()))
                if "cb" in sec
                else float(plant.cb().reshape(()))
            )
            c_safe = _as_number(sec.get("c_safe", 1.9), f"{path}.c_safe")
            return SisoBound(cb=cb, c_safe=c_safe, wiggle=wiggle)
        if name == "ilchmann_townley":
            mu_init = _as_number(sec.get("mu_init", 0.1), f"{path}.mu_init")
            return IlchmannTownley(mu_init=mu_init, wiggle=wiggle)
        mu = _as_number(_require(sec, "mu", path), f"{path}.mu", positive=True)
        return FixedGraininess(mu=mu, wiggle=wiggle)
    except (ValueError, AssumptionError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_controller(section, path: str, plant: LTIPlant):
    sec = _expect_mapping(section, path)
    _reject_unknown(
        sec,
        {"k0", "policy", "wiggle", "seed"} | set().union(*_POLICY_KEYS.values()),
        path,
    )
    k0 = _as_number(_require(sec, "k0", path), f"{path}.k0", positive=True)
    name = _require(sec, "policy", path)
    seed = sec.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError(f"{path}.seed: expected an integer")
    for other, keys in _POLICY_KEYS.items():
        if other != name:
            stray = (set(sec) & keys) - _POLICY_KEYS.get(name, set())
            if stray:
                raise ConfigError(
                    f"{path}: field(s) {sorted(stray)} do not apply to policy {name!r}"
                )
    wiggle = _parse_wiggle(sec.get("wiggle"), f"{path}.wiggle", plant, seed)
    policy = _parse_policy(sec, path, plant, wiggle, name)
    return k0, policy, seed


def _parse_run(section, path: str):
    sec = _expect_mapping(section, path)
    _reject_unknown(sec, {"horizon", "h_int", "out", "blowup_norm"}, path)
    horizon = _as_number(_require(sec, "horizon", path), f"{path}.horizon", positive=True)
    h_int = _as_number(sec.get("h_int", DEFAULT_H_INT), f"{path}.h_int", positive=True)
    out = sec.get("out", "trace.csv")
    if not isinstance(out, str) or not out:
        raise ConfigError(f"{path}.out: expected a non-empty string")
    blowup = _as_number(sec.get("blowup_norm", DEFAULT_BLOWUP_NORM), f"{path}.blowup_norm", positive=True)
    return horizon, h_int, out, blowup


def _parse_check(section, path: str) -> CheckSettings:
    if section is None:
        return CheckSettings()
    sec = _expect_mapping(section, path)
    _reject_unknown(
        sec,
        {"mu_list", "k_star_list", "lattice_k", "lattice_mu_fractions", "detectability_tol"},
        path,
    )
    defaults = CheckSettings()

    def number_tuple(key, fallback):
        if key not in sec:
            return fallback
        raw = sec[key]
        if not isinstance(raw, list) or not raw:
            raise ConfigError(f"{path}.{key}: expected a non-empty list of numbers")
        return tuple(_as_number(v, f"{path}.{key}[{i}]", positive=True) for i, v in enumerate(raw))

    return CheckSettings(
        mu_list=number_tuple("mu_list", defaults.mu_list),
        k_star_list=number_tuple("k_star_list", defaults.k_star_list),
        lattice_k=number_tuple("lattice_k", defaults.lattice_k),
        lattice_mu_fractions=number_tuple("lattice_mu_fractions", defaults.lattice_mu_fractions),
        detectability_tol=_as_number(
            sec.get("detectability_tol", defaults.detectability_tol),
            f"{path}.detectability_tol",
            positive=True,
        ),
    )


def parse_config(data: dict) -> ScenarioConfig:
    """Validate a parsed JSON document into a ScenarioConfig.

    Every problem is reported as ConfigError naming the offending field.
    """
    doc = _expect_mapping(data, "config")
    _reject_unknown(doc, {"plant", "timescale", "controller", "run", "check"}, "config")
    plant = _parse_plant(_require(doc, "plant", "config"), "plant")
    mode, schedule, program = _parse_timescale(_require(doc, "timescale", "config"), "timescale")
    k0, policy, seed = _parse_controller(_require(doc, "controller", "config"), "controller", plant)
    horizon, h_int, out, blowup = _parse_run(_require(doc, "run", "config"), "run")
    return ScenarioConfig(
        plant=plant,
        mode=mode,
        schedule=schedule,
        program=program,
        policy=policy,
        k0=k0,
        horizon=horizon,
        h_int=h_int,
        out=out,
        seed=seed,
        blowup_norm=blowup,
        check=_parse_check(doc.get("check"), "check"),
    )


def load_config(path) -> ScenarioConfig:
    """Read and validate a scenario JSON file."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from exc
    return parse_config(data)


@dataclass
class SimulationResult:
    trace: SimulationTrace
    summary: dict
    blew_up: bool
    warnings: list


def _policy_eps1(policy: GraininessPolicy, plant: LTIPlant) -> float:
    if isinstance(policy, MimoBound):
        return policy.eps1
    return default_eps1(plant.cb())


class _Recorder:
    def __init__(self, plant: LTIPlant, policy_ceiling, blowup_norm: float):
        self.plant = plant
        self.ceiling = policy_ceiling
        self.blowup_norm = blowup_norm
        self.records: list[TraceRecord] = []
        self.blew_up = False

    def add(self, t: float, mu: float, k: float, blocked: bool, x: np.ndarray, y=None) -> bool:
        """Append a record; returns False once the state norm blows up."""
        norm = float(np.linalg.norm(x))
        if not math.isfinite(norm):
            self.blew_up = True
            return False
        if y is None:
            y = self.plant.C @ x
        self.records.append(
            TraceRecord(t=t, mu=mu, k=k, blocked=blocked, mu_bar=self.ceiling(k), y=y, x=x)
        )
        if norm > self.blowup_norm:
            self.blew_up = True
            return False
        return True

    def add_dense_samples(self, t_start: float, result, include_last: bool) -> bool:
        end = len(result.times) if include_last else len(result.times) - 1
        for idx in range(end):
            ok = self.add(
                t_start + result.times[idx],
                0.0,
                float(result.gains[idx]),
                False,
                result.states[idx],
                y=result.outputs[idx],
            )
            if not ok:
                return False
        return True


def _simulate_blocking(cfg: ScenarioConfig, recorder: _Recorder):
    plant, schedule = cfg.plant, cfg.schedule
    policy = cfg.policy
    x = plant.x0.copy()
    k = cfg.k0
    t = 0.0
    tol = 1e-12 * max(1.0, cfg.horizon)
    if not recorder.add(t, 0.0, k, False, x):
        return
    with np.errstate(over="ignore", invalid="ignore"):
        while t < cfg.horizon - tol:
            duration = min(schedule.continuous_run, cfg.horizon - t)
            result = run_dense(plant, x, k, duration, cfg.h_int, gain_law=True)
            reached_end = t + duration >= cfg.horizon - tol
            if not recorder.add_dense_samples(t, result, include_last=reached_end):
                return
            x, k = result.x_end, result.k_end
            t += duration
            if reached_end:
                return
            state = ControllerState(k=k, t=t)
            mu_next, policy = next_graininess(
                policy, state, blocked=True, block_cap_fraction=schedule.block_cap_fraction
            )
            if not recorder.add(t, mu_next, k, True, x):
                return
            x, y = step_scattered(plant, x, k, mu_next)
            k = k + mu_next * float(y @ y)
            t += mu_next
            if not recorder.add(t, 0.0, k, False, x):
                return
            if t >= cfg.horizon - tol:
                return


def _simulate_program(cfg: ScenarioConfig, recorder: _Recorder):
    plant = cfg.plant
    grid = realize(cfg.program, cfg.horizon, cfg.h_int)
    times, mus = grid.times, grid.mus
    x = plant.x0.copy()
    k = cfg.k0
    i = 0
    last = len(grid) - 1
    with np.errstate(over="ignore", invalid="ignore"):
        while i < last:
            if mus[i] > 0.0:
                if not recorder.add(times[i], mus[i], k, True, x):
                    return
                x, y = step_scattered(plant, x, k, mus[i])
                k = k + mus[i] * float(y @ y)
                i += 1
            else:
                j = i
                while j < last and mus[j] == 0.0:
                    j += 1
                if not recorder.add(times[i], 0.0, k, False, x):
                    return
                result = run_dense(plant, x, k, times[j] - times[i], cfg.h_int, gain_law=True)
                ok = recorder.add_dense_samples(times[i], result, include_last=False)
                x, k = result.x_end, result.k_end
                if not ok:
                    return
                i = j
        recorder.add(times[last], 0.0, k, False, x)


def _first_certified(trace: SimulationTrace, plant: LTIPlant, eps1: float):
    """First (t, k) on the trace where the frozen-gain loop looks positive-real
    and the expc deviation at the current ceiling is below eps1."""
    records = trace.records
    stride = max(1, len(records) // 200)
    candidates = records[::stride]
    last_checked_k = None
    with np.errstate(over="ignore", invalid="ignore"):
        for rec in candidates:
            deviation = sigma_decomposition(plant.A, rec.mu_bar).norm
            if not math.isfinite(deviation) or deviation >= eps1:
                continue
            if last_checked_k is not None and abs(rec.k - last_checked_k) <= 5e-3 * last_checked_k:
                continue
            last_checked_k = rec.k
            if positive_real_diagnostic(plant, rec.k).passes:
                return rec.t, rec.k
    return None


def run_scenario(cfg: ScenarioConfig) -> SimulationResult:
    """Simulate the closed loop described by cfg and summarize the trace.

    Raises AssumptionError when the CB definiteness assumption fails; a
    marginal or non-minimum-phase zero classification only produces a
    warning (the adaptation may still regulate such plants in practice).
    """
    audit = check_assumptions(cfg.plant)
    if not audit.a2_pass:
        raise AssumptionError(
            f"CB + (CB)^T must be positive definite (min eigenvalue {audit.cb_sym_min_eig:.6g})"
        )
    warnings = []
    if audit.a1_verdict != "strict":
        zeros = ", ".join(f"{z:.6g}" for z in audit.zeros)
        warnings.append(
            f"minimum-phase assumption is {audit.a1_verdict} (transmission zeros: {zeros});"
            " proceeding anyway"
        )
    recorder = _Recorder(cfg.plant, cfg.policy.ceiling, cfg.blowup_norm)
    if cfg.mode == "blocking":
        _simulate_blocking(cfg, recorder)
    else:
        _simulate_program(cfg, recorder)
    trace = SimulationTrace(recorder.records)
    summary = summarize(trace, cfg)
    summary["blew_up"] = recorder.blew_up
    return SimulationResult(
        trace=trace, summary=summary, blew_up=recorder.blew_up, warnings=warnings
    )


def summarize(trace: SimulationTrace, cfg: Optional[ScenarioConfig] = None, tail_fraction: float = 0.2) -> dict:
    """Trace-level metrics: final gain, output energy, envelope, convergence."""
    times = trace.times
    gains = trace.gains
    t0, t_end = times[0], times[-1]
    tail_start = t_end - tail_fraction * (t_end - t0)
    total_energy = trace.y_squared_delta_integral()
    tail_energy = trace.y_squared_delta_integral(t_from=tail_start)
    tail_mask = times >= tail_start - 1e-12
    k_window = gains[tail_mask]
    k_final = float(gains[-1])
    summary = {
        "records": len(trace),
        "t_end": float(t_end),
        "final_k": k_final,
        "y_l2_total": total_energy,
        "y_l2_tail_fraction": (tail_energy / total_energy) if total_energy > 0 else 0.0,
        "trailing_k_variation": float((np.max(k_window) - np.min(k_window)) / k_final),
        "final_norm_x": float(trace.norms[-1]),
    }
    fit = envelope_fit(times, trace.norms)
    summary["envelope_K"] = fit.K
    summary["envelope_alpha"] = fit.alpha_fit
    if cfg is not None:
        certified = _first_certified(trace, cfg.plant, _policy_eps1(cfg.policy, cfg.plant))
        if certified is not None:
            summary["certified_t"], summary["certified_k"] = certified
    return summary
