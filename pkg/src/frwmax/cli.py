"""Command-line front end: ``frwmax <task> [--config FILE] [--key value ...]``.

Configuration is a flat key = value text file ('#' starts a comment);
command-line ``--key value`` pairs override it.  Every run writes a CSV data
file and a JSON summary {task, config, metrics, pass, wall_time_s} into the
output directory; CSV bytes are reproducible for a fixed config and seed
(the JSON differs only in wall_time_s).  Exit status: 0 success, 2 a
verification assertion failed, 1 usage or configuration error.

Column layouts are documented in docs/outputs.md.  The environment variable
FRWMAX_THREADS caps worker parallelism (0 = auto); the seed only moves
probe placement, never the physics.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import analysis, oracle
from .fields import make_bump
from .geometry import Curvature, SpatialPoint
from .propagator import CauchyProblem, data_support, propagate, solve_batch

TASKS = (
    "propagate",
    "decay",
    "huygens",
    "singular-limit",
    "cross-singularity",
    "oracle-compare",
    "identify-pde",
)

_BASE_DEFAULTS = {
    "curvature": "flat",
    "tau0": "0",
    "order": "32",
    "seed": "0",
    "output_dir": "frwmax_out",
    "f_center": "0,0,0",
    "f_radius": "1",
    "f_amplitude": "1,-0.6,0.3",
    "g_center": "0,0,0",
    "g_radius": "1",
    "g_amplitude": "0.8,0.5,-0.4",
}

_CURVATURE_DEFAULTS = {
    "hyperbolic": {
        "f_center": "0,0,1",
        "f_radius": "0.3",
        "g_center": "0,0,1",
        "g_radius": "0.3",
    }
}

_TASK_DEFAULTS = {
    "propagate": {"tau_values": "1,2,3", "probe": "0,0,0.5"},
    "decay": {
        "tau_min": "20",
        "tau_max": "200",
        "tau_count": "24",
        "directions": "24",
    },
    "huygens": {"tau": "auto", "directions": "24"},
    "singular-limit": {
        "tau_start": "0.2",
        "halvings": "6",
        "threshold": "1e-3",
        "f_radius": "3",
        "g_radius": "3",
        "f_amplitude": "0.2,-0.15,0.1",
        "g_amplitude": "0.1,0.08,-0.05",
    },
    "cross-singularity": {
        "tau_max_trace": "0.8",
        "halvings": "8",
        "f_amplitude": "0.5,0,0",
        "g_amplitude": "0.4,0.3,-0.2",
    },
    "oracle-compare": {
        "tau0": "1",
        "tau_values": "2,3,4",
        "grid_n": "128",
        "tolerance": "1e-3",
        "order": "64",
    },
    "identify-pde": {"curvature": "hyperbolic", "tau": "1.5", "grid_n": "128", "order": "64"},
}

_TASK_CURVATURE_DEFAULTS = {
    ("decay", "hyperbolic"): {"tau_min": "8", "tau_max": "20", "tau_count": "13"},
    ("singular-limit", "hyperbolic"): {
        "f_center": "0,0,2",
        "g_center": "0,0,2",
        "f_radius": "1.7",
        "g_radius": "1.7",
        "f_amplitude": "0.004,-0.003,0.002",
        "g_amplitude": "0.004,0.002,-0.003",
    },
    ("cross-singularity", "hyperbolic"): {
        "f_center": "0,0,1",
        "g_center": "0,0,1",
        "f_radius": "0.3",
        "g_radius": "0.3",
    },
}

_EXPECTED_DECAY = {
    # (curvature, variable) -> (model, expected, tolerance)
    ("flat", "conformal_tau"): ("power_law", -1.0, 0.05),
    ("flat", "cosmological_t"): ("power_law", -1.0 / 3.0, 0.05),
    ("hyperbolic", "conformal_tau"): ("exponential", -1.0, 0.05),
    ("hyperbolic", "cosmological_t"): ("power_law", -1.0, 0.1),
}


class ConfigError(Exception):
    """Raised with a consolidated list of offending fields."""


def parse_config_file(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = stripped.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def parse_overrides(tokens: list[str]) -> dict[str, str]:
    out: dict[str, str] = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--"):
            raise ConfigError(f"expected --key value override, got {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
        else:
            if i + 1 >= len(tokens):
                raise ConfigError(f"override --{key} is missing a value")
            i += 1
            value = tokens[i]
        out[key.replace("-", "_")] = value
        i += 1
    return out


def resolve_config(task: str, file_kv: dict[str, str], overrides: dict[str, str]) -> dict[str, str]:
    merged = dict(_BASE_DEFAULTS)
    merged.update(_TASK_DEFAULTS.get(task, {}))
    curvature = overrides.get("curvature", file_kv.get("curvature", merged["curvature"]))
    merged.update(_CURVATURE_DEFAULTS.get(curvature, {}))
    merged.update(_TASK_DEFAULTS.get(task, {}))  # task beats curvature family defaults
    merged.update(_TASK_CURVATURE_DEFAULTS.get((task, curvature), {}))
    merged.update(file_kv)
    merged.update(overrides)
    merged["task"] = task
    return merged


class _Validator:
    def __init__(self, raw: dict[str, str]):
        self.raw = raw
        self.errors: list[str] = []

    def _get(self, key: str) -> str:
        if key not in self.raw:
            self.errors.append(f"{key}: missing required parameter")
            return ""
        return self.raw[key]

    def floatv(self, key: str, positive=False, nonneg=False) -> float:
        text = self._get(key)
        try:
            v = float(text)
        except ValueError:
            self.errors.append(f"{key}: not a number ({text!r})")
            return math.nan
        if positive and not v > 0:
            self.errors.append(f"{key}: must be positive, got {v}")
        if nonneg and v < 0:
            self.errors.append(f"{key}: must be nonnegative, got {v}")
        return v

    def intv(self, key: str, minimum=None) -> int:
        text = self._get(key)
        try:
            v = int(text)
        except ValueError:
            self.errors.append(f"{key}: not an integer ({text!r})")
            return 0
        if minimum is not None and v < minimum:
            self.errors.append(f"{key}: must be at least {minimum}, got {v}")
        return v

    def triple(self, key: str) -> tuple[float, float, float]:
        text = self._get(key)
        parts = [p for p in text.split(",") if p.strip() != ""]
        if len(parts) != 3:
            self.errors.append(f"{key}: expected three comma-separated numbers, got {text!r}")
            return (math.nan,) * 3
        try:
            return tuple(float(p) for p in parts)  # type: ignore[return-value]
        except ValueError:
            self.errors.append(f"{key}: expected numbers, got {text!r}")
            return (math.nan,) * 3

    def floats(self, key: str) -> list[float]:
        text = self._get(key)
        try:
            return [float(p) for p in text.split(",") if p.strip() != ""]
        except ValueError:
            self.errors.append(f"{key}: expected comma-separated numbers, got {text!r}")
            return []

    def curvature(self) -> Curvature:
        text = self._get("curvature")
        try:
            return Curvature(text)
        except ValueError:
            self.errors.append(f"curvature: must be 'flat' or 'hyperbolic', got {text!r}")
            return Curvature.FLAT

    def done(self):
        if self.errors:
            raise ConfigError("; ".join(self.errors))


def build_problem(v: _Validator) -> CauchyProblem:
    curvature = v.curvature()
    tau0 = v.floatv("tau0", nonneg=True)
    f_center = v.triple("f_center")
    g_center = v.triple("g_center")
    f_radius = v.floatv("f_radius", positive=True)
    g_radius = v.floatv("g_radius", positive=True)
    f_amp = v.triple("f_amplitude")
    g_amp = v.triple("g_amplitude")
    v.done()
    try:
        f = make_bump(SpatialPoint(f_center, curvature), f_radius, f_amp)
        g = make_bump(SpatialPoint(g_center, curvature), g_radius, g_amp)
        return CauchyProblem(curvature=curvature, f=f, g=g, tau0=tau0)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


# ---------------------------------------------------------------------------
# task runners: each returns (metrics, passed, csv_header, csv_rows)
# ---------------------------------------------------------------------------


def _task_propagate(v: _Validator):
    problem = build_problem(v)
    order = v.intv("order", minimum=4)
    taus = v.floats("tau_values")
    probe = v.triple("probe")
    if not taus:
        v.errors.append("tau_values: at least one value required")
    for t in taus:
        if problem.tau0 > 0 and t <= problem.tau0:
            v.errors.append(f"tau_values: tau = {t} must exceed tau0 = {problem.tau0}")
        if problem.tau0 == 0 and t == 0.0:
            v.errors.append("tau_values: tau = 0 is the data slice; use a nonzero value")
    v.done()
    x = SpatialPoint(probe, problem.curvature)
    samples = solve_batch(problem, [(t, x) for t in taus], order)
    rows = [
        [t, *x.coords, *s.A.tolist(), *s.A_tau.tolist()]
        for t, s in zip(taus, samples)
    ]
    header = ["tau", "x", "y", "z", "A1", "A2", "A3", "At1", "At2", "At3"]
    metrics = {
        "max_abs_A": max(float(np.max(np.abs(s.A))) for s in samples),
        "max_abs_A_tau": max(float(np.max(np.abs(s.A_tau))) for s in samples),
        "n_samples": len(samples),
    }
    return metrics, True, header, rows


def _task_decay(v: _Validator):
    problem = build_problem(v)
    order = v.intv("order", minimum=4)
    seed = v.intv("seed")
    directions = v.intv("directions", minimum=4)
    tau_min = v.floatv("tau_min", positive=True)
    tau_max = v.floatv("tau_max", positive=True)
    count = v.intv("tau_count", minimum=5)
    if not math.isnan(tau_min) and not math.isnan(tau_max) and tau_max <= tau_min:
        v.errors.append(f"tau_max: must exceed tau_min, got {tau_max} <= {tau_min}")
    v.done()
    taus = np.geomspace(tau_min, tau_max, count)
    cname = problem.curvature.value
    _, r_geo = data_support(problem)
    try:
        taus, amps = analysis.peak_amplitudes(
            problem, taus, directions=directions, order=order, seed=seed
        )
        fits = {}
        for variable in ("conformal_tau", "cosmological_t"):
            model, expected, tol = _EXPECTED_DECAY[(cname, variable)]
            fit = analysis.fit_decay_series(
                taus, amps, model, variable, problem.curvature, problem.tau0, r_geo
            )
            fits[variable] = (fit, expected, tol)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    from .timeframe import tau_to_t

    rows = [[t, tau_to_t(t, problem.curvature), a] for t, a in zip(taus, amps)]
    header = ["tau", "t", "peak_amplitude"]
    metrics = {}
    passed = True
    for variable, (fit, expected, tol) in fits.items():
        ok = abs(fit.estimate - expected) <= tol
        passed = passed and ok
        metrics[variable] = {
            "model": fit.model,
            "estimate": fit.estimate,
            "stderr": fit.stderr,
            "expected": expected,
            "tolerance": tol,
            "pass": ok,
            "samples": fit.samples,
        }
    return metrics, passed, header, rows


def _task_huygens(v: _Validator):
    problem = build_problem(v)
    order = v.intv("order", minimum=4)
    seed = v.intv("seed")
    directions = v.intv("directions", minimum=4)
    _, r_geo = data_support(problem)
    tau_text = v.raw.get("tau", "auto")
    if tau_text == "auto":
        tau = problem.tau0 + 10.0 * r_geo
    else:
        tau = v.floatv("tau", positive=True)
    v.done()
    try:
        support = analysis.huygens_map(
            problem, tau, directions=directions, order=order, seed=seed
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rows = [
        [i, d, *p, label, m]
        for i, (p, d, label, m) in enumerate(
            zip(support.probes, support.distances, support.classification, support.magnitudes)
        )
    ]
    header = ["probe", "distance", "x", "y", "z", "region", "magnitude"]
    passed = support.off_shell_clean and support.on_shell_significant
    metrics = {
        "tau": tau,
        "r_geo": r_geo,
        "c_data": support.c_data,
        "max_on_shell": support.max_on_shell,
        "max_off_shell": support.max_off_shell,
        "off_shell_clean": support.off_shell_clean,
        "on_shell_significant": support.on_shell_significant,
    }
    return metrics, passed, header, rows


def _task_singular_limit(v: _Validator):
    problem = build_problem(v)
    order = v.intv("order", minimum=4)
    seed = v.intv("seed")
    tau_start = v.floatv("tau_start", positive=True)
    halvings = v.intv("halvings", minimum=3)
    threshold = v.floatv("threshold", positive=True)
    if problem.tau0 != 0.0:
        v.errors.append("tau0: singular-limit task requires tau0 = 0")
    v.done()
    taus = [tau_start * 0.5**k for k in range(halvings + 1)]
    probes = analysis.support_probes(problem, seed=seed)
    report = analysis.singular_limit_report(problem, probes, taus, order=order)
    rows = [[t, ea, eat] for t, ea, eat in zip(report.taus, report.err_a, report.err_a_tau)]
    header = ["tau", "err_A", "err_A_tau"]
    final_ok = report.err_a[-1] < threshold and report.err_a_tau[-1] < threshold
    passed = report.passed and final_ok
    metrics = {
        "tail_monotone": report.tail_monotone,
        "halving_ratios_ok": report.halving_ratios_ok,
        "final_err_A": report.err_a[-1],
        "final_err_A_tau": report.err_a_tau[-1],
        "threshold": threshold,
        "final_below_threshold": final_ok,
        "n_probes": len(probes),
    }
    return metrics, passed, header, rows


def _task_cross_singularity(v: _Validator):
    problem = build_problem(v)
    order = v.intv("order", minimum=4)
    tau_max = v.floatv("tau_max_trace", positive=True)
    halvings = v.intv("halvings", minimum=3)
    if problem.tau0 != 0.0:
        v.errors.append("tau0: cross-singularity task requires tau0 = 0")
    v.done()
    center, _ = data_support(problem)
    x = SpatialPoint(tuple(center), problem.curvature)
    pos = [tau_max * 0.5**k for k in range(halvings + 1)]
    grid = sorted([-t for t in pos] + pos)
    trace = analysis.cross_singularity_trace(problem, x, grid, order=order)
    rows = [[t, *a.tolist()] for t, a in zip(trace.taus, trace.values)]
    # splice row at the singular slice itself
    rows.append([0.0, *trace.center_value.tolist()])
    rows.sort(key=lambda r: r[0])
    header = ["tau", "A1", "A2", "A3"]
    metrics = {
        "probe": tuple(x.coords),
        "jump_taus": list(trace.jump_taus),
        "jumps": list(trace.jumps),
        "jump_ratios_ok": trace.jump_ratios_ok,
        "modulus_ok": trace.modulus_ok,
    }
    return metrics, trace.passed, header, rows


def _default_oracle_probes(seed: int) -> list[tuple[float, float, float]]:
    dirs = analysis.seeded_directions(4, seed)
    radii = (0.6, 1.5, 2.5)
    out = []
    for r in radii:
        for mu, phi in dirs:
            st = math.sqrt(max(0.0, 1.0 - mu * mu))
            out.append((r * st * math.cos(phi), r * st * math.sin(phi), r * mu))
    return out


def _task_oracle_compare(v: _Validator):
    problem = build_problem(v)
    order = v.intv("order", minimum=4)
    seed = v.intv("seed")
    taus = v.floats("tau_values")
    nx = v.intv("grid_n", minimum=16)
    tol = v.floatv("tolerance", positive=True)
    if problem.curvature is not Curvature.FLAT:
        v.errors.append("curvature: oracle-compare is the flat-chart task")
    for t in taus:
        if t <= problem.tau0:
            v.errors.append(f"tau_values: tau = {t} must exceed tau0 = {problem.tau0}")
    v.done()
    probes = _default_oracle_probes(seed)
    try:
        cmpres = oracle.compare_flat_oracle(problem, taus, probes, nx=nx, order=order)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rows = []
    for i, t in enumerate(cmpres.taus):
        for j, p in enumerate(cmpres.probes):
            for c in range(3):
                rows.append(
                    [t, j, *p, c + 1, cmpres.formula[i, j, c], cmpres.grid[i, j, c],
                     abs(cmpres.formula[i, j, c] - cmpres.grid[i, j, c])]
                )
    header = ["tau", "probe", "x", "y", "z", "component", "formula", "grid", "abs_diff"]
    passed = all(r <= tol for r in cmpres.rel_linf)
    metrics = {
        "rel_linf": {str(t): r for t, r in zip(cmpres.taus, cmpres.rel_linf)},
        "tolerance": tol,
        "grid_n": list(cmpres.spec.n),
        "dx": cmpres.spec.dx,
        "dt": cmpres.spec.dt,
    }
    return metrics, passed, header, rows


def _task_identify_pde(v: _Validator):
    problem = build_problem(v)
    order = v.intv("order", minimum=4)
    tau = v.floatv("tau", positive=True)
    nx = v.intv("grid_n", minimum=16)
    if problem.curvature is not Curvature.HYPERBOLIC:
        v.errors.append("curvature: identify-pde requires the hyperbolic chart")
    v.done()
    try:
        report = oracle.identify_hyperbolic_pde(problem, tau=tau, nx=nx, order=order)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rows = []
    for j, p in enumerate(report.probes):
        for c in range(3):
            rows.append(
                [j, *p, c + 1, report.formula[j, c],
                 report.grid_unshifted[j, c], report.grid_shifted[j, c]]
            )
    header = ["probe", "x", "y", "z", "component", "formula", "grid_shift0", "grid_shift1"]
    passed = report.verdict in ("mass_shift=0", "mass_shift=1")
    metrics = {
        "verdict": report.verdict,
        "residual_unshifted": report.residual_unshifted,
        "residual_shifted": report.residual_shifted,
        "tau": report.tau,
        "grid_n": report.nx,
    }
    return metrics, passed, header, rows


_RUNNERS = {
    "propagate": _task_propagate,
    "decay": _task_decay,
    "huygens": _task_huygens,
    "singular-limit": _task_singular_limit,
    "cross-singularity": _task_cross_singularity,
    "oracle-compare": _task_oracle_compare,
    "identify-pde": _task_identify_pde,
}


def run(task: str, raw_config: dict[str, str]) -> int:
    """Execute one task; writes <task>.csv and <task>.json to output_dir."""
    start = time.perf_counter()
    v = _Validator(raw_config)
    out_dir = Path(raw_config.get("output_dir", "frwmax_out"))
    try:
        metrics, passed, header, rows = _RUNNERS[task](v)
    except ConfigError:
        raise
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = task.replace("-", "_")
    write_csv(out_dir / f"{stem}.csv", header, rows)
    summary = {
        "task": task,
        "config": dict(sorted(raw_config.items())),
        "metrics": metrics,
        "pass": bool(passed),
        "wall_time_s": round(time.perf_counter() - start, 3),
    }
    with open(out_dir / f"{stem}.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0 if passed else 2


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="frwmax",
        description="Spherical-means wave propagators on FRW backgrounds: "
        "propagation, decay, Huygens, singular-limit and oracle tasks.",
    )
    parser.add_argument("task", choices=TASKS)
    parser.add_argument("--config", help="flat key = value configuration file")
    args, extra = parser.parse_known_args(argv)
    try:
        file_kv = parse_config_file(args.config) if args.config else {}
        overrides = parse_overrides(extra)
        raw = resolve_config(args.task, file_kv, overrides)
        return run(args.task, raw)
    except ConfigError as exc:
        print(f"frwmax: configuration error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"frwmax: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
