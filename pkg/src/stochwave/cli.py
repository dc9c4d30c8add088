"""Command line front end.

Subcommands
-----------
simulate      dump one sample trajectory (coefficients per step) to CSV
rate-time     temporal strong-rate study -> rates.csv
rate-space    spatial strong-rate study -> rates.csv
trace         expected-energy growth against the exact line -> trace.csv
energy-check  per-step energy-identity audit of the stepper
selftest      quick property suite over all modules

Configuration is a flat JSON file (--config) whose keys match the flag
names; every flag given on the command line overrides its config key.
With no arguments the experiment commands reproduce the reference
setup: unit horizon, zero initial data, cubic drift u^3, noise decay
exponent 0.5005, spectral space.  The master seed falls back to the
STOCHWAVE_SEED environment variable when neither flag nor config set it.

Exit codes: 0 success, 1 failed check, 2 invalid configuration,
3 implicit solve non-convergence, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .backends import make_backend
from .harness import (
    ConfigError,
    DegenerateStudyError,
    ExperimentConfig,
    _noise_model,
    _resolution,
    _steps_for,
    resolve_config,
    temporal_study,
    spatial_study,
    trace_study,
    validate_config,
    write_manifest,
    write_rates_csv,
    write_trace_csv,
)
from .nonlinearity import CubicDrift
from .noise import sample_increments
from .stepper import (
    NonConvergenceError,
    State,
    StepOperators,
    energy,
    hamiltonian_residual,
    step,
    trajectory,
)

_CONFIG_KEYS = (
    "backend", "modes", "mesh_exponent", "t_final", "tau", "taus", "tau_ref",
    "space_levels", "space_ref", "samples", "seed", "q_exponent", "gamma",
    "noise_modes", "drift", "tol", "max_iter", "damping", "workers",
    "batch_size",
)


def _parse_mesh(text: str) -> int:
    """Mesh width given as 2^-k or a plain float; returns the exponent."""
    text = text.strip()
    if text.startswith("2^-"):
        return int(text[3:])
    h = float(text)
    k = round(np.log2(1.0 / h))
    if not np.isclose(h, 2.0**-k):
        raise argparse.ArgumentTypeError(f"mesh width {text} is not dyadic")
    return int(k)


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="JSON config file with flat keys")
    p.add_argument("--seed", type=int, help="master seed (fallback: STOCHWAVE_SEED)")
    p.add_argument("--samples", type=int, help="Monte Carlo sample count")
    p.add_argument("--workers", type=int, help="worker pool width")
    p.add_argument("--batch-size", dest="batch_size", type=int,
                   help="samples vectorized per work item")
    p.add_argument("--backend", choices=("spectral", "fem"))
    p.add_argument("--modes", type=int,
                   help="spectral mode count J (0 switches the noise off)")
    p.add_argument("--mesh", dest="mesh_exponent", type=_parse_mesh,
                   metavar="2^-K", help="finite element mesh width")
    p.add_argument("--tau", type=float, help="time step")
    p.add_argument("--t-final", dest="t_final", type=float, help="horizon T")
    p.add_argument("--q-exponent", dest="q_exponent", type=float,
                   help="noise decay exponent s in q_j = lambda_j^-s")
    p.add_argument("--gamma", type=float, help="claimed noise smoothness index")
    p.add_argument("--noise-modes", dest="noise_modes", type=int,
                   help="noise truncation (default: space resolution)")
    p.add_argument("--out", type=Path, default=None, help="output directory")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stochwave",
        description="energy-law-preserving integrator for the stochastic "
        "wave equation and its convergence experiments",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("simulate", "dump a single sample trajectory"),
        ("rate-time", "temporal strong convergence study"),
        ("rate-space", "spatial strong convergence study"),
        ("trace", "expected energy growth study"),
        ("energy-check", "per-step energy identity audit"),
        ("selftest", "run the built-in property suite"),
    ):
        p = sub.add_parser(name, help=text)
        if name != "selftest":
            _add_common(p)
        if name in ("simulate", "energy-check"):
            p.add_argument("--steps", type=int, help="number of steps to take")
    return parser


def _load_config(args) -> ExperimentConfig:
    values: dict = {}
    if getattr(args, "config", None) is not None:
        try:
            raw = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise OSError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        unknown = set(raw) - set(_CONFIG_KEYS) - {"out", "steps"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if getattr(args, "out", None) is None and raw.get("out") is not None:
            args.out = Path(raw["out"])
        if getattr(args, "steps", None) is None and raw.get("steps") is not None:
            args.steps = int(raw["steps"])
        values.update(
            {k: v for k, v in raw.items() if k not in ("out", "steps")}
        )
    for key in _CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    if "seed" not in values and os.environ.get("STOCHWAVE_SEED"):
        values["seed"] = int(os.environ["STOCHWAVE_SEED"])
    if "drift" in values and isinstance(values["drift"], dict):
        try:
            values["drift"] = CubicDrift(**values["drift"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid drift: {exc}") from exc
    for key in ("taus", "space_levels"):
        if key in values and values[key] is not None:
            values[key] = tuple(values[key])
    if values.get("modes") is not None and values["modes"] <= 0:
        # degenerate request: no noise modes, minimal spatial space
        values["modes"] = 1
        values.setdefault("noise_modes", 0)
    try:
        return ExperimentConfig(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _out_dir(args) -> Path:
    out = getattr(args, "out", None) or Path("out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _rate_results(report) -> dict:
    return {
        "slope": report.slope,
        "intercept": report.intercept,
        "half_width": report.half_width,
        "slope_u": report.slope_u,
        "slope_v": report.slope_v,
    }


def _cmd_rate(args, study: str) -> int:
    config = _load_config(args)
    report = temporal_study(config) if study == "temporal" else spatial_study(config)
    out = _out_dir(args)
    rates = out / "rates.csv"
    write_rates_csv(rates, report)
    write_manifest(
        out / "manifest.json",
        f"rate-{'time' if study == 'temporal' else 'space'}",
        resolve_config(config, study),
        _rate_results(report),
        [rates.name],
    )
    print(
        f"{report.study} study: slope={report.slope:.4f} "
        f"(+/- {report.half_width:.4f}), wrote {rates}"
    )
    return 0


def _cmd_trace(args) -> int:
    config = _load_config(args)
    report = trace_study(config)
    out = _out_dir(args)
    path = out / "trace.csv"
    write_trace_csv(path, report)
    write_manifest(
        out / "manifest.json",
        "trace",
        resolve_config(config, "trace"),
        {
            "slope": report.slope,
            "ref_slope": report.ref_slope,
            "initial_energy": report.initial_energy,
        },
        [path.name],
    )
    print(
        f"trace study: fitted slope={report.slope:.6f}, "
        f"exact slope={report.ref_slope:.6f}, wrote {path}"
    )
    return 0


def _cmd_simulate(args) -> int:
    config = resolve_config(_load_config(args), "single")
    if getattr(args, "steps", None):
        config = replace(config, t_final=args.steps * config.tau)
    validate_config(config, "single")
    backend = make_backend(config.backend, _resolution(config))
    n_steps = (
        args.steps if getattr(args, "steps", None)
        else _steps_for(config.tau, config.t_final)
    )
    model = _noise_model(config, backend.dim)
    table = (
        sample_increments(model, config.plan(), 0, n_steps, config.tau)
        if model.j_noise > 0
        else np.zeros((n_steps, 0))
    )
    ops = StepOperators(backend, config.tau)
    states = trajectory(State.zero(backend), table, ops, config.drift, config.solver())
    out = _out_dir(args)
    path = out / "trajectory.csv"
    dim = backend.dim
    header = (
        ["t"]
        + [f"u_{k}" for k in range(1, dim + 1)]
        + [f"v_{k}" for k in range(1, dim + 1)]
    )
    lines = [",".join(header)]
    for n, state in enumerate(states):
        row = [repr(n * config.tau)]
        row += [repr(float(x)) for x in state.u]
        row += [repr(float(x)) for x in state.v]
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")
    write_manifest(
        out / "manifest.json", "simulate", config,
        {"steps": n_steps, "final_energy": float(energy(states[-1], config.drift, backend))},
        [path.name],
    )
    print(f"simulate: {n_steps} steps, wrote {path}")
    return 0


def _cmd_energy_check(args) -> int:
    """Audit the per-step energy identity along one path.

    Defaults to the deterministic setting (no noise, first mode excited)
    so the audit is a pure conservation test; pass --noise-modes and
    --q-exponent to audit noisy steps, where the identity holds for the
    velocity with the increment subtracted.
    """
    base = _load_config(args)
    if getattr(args, "noise_modes", None) is None and (
        getattr(args, "config", None) is None
    ):
        base = replace(base, noise_modes=0)
    config = resolve_config(base, "single")
    if getattr(args, "tau", None) is None and args.config is None:
        config = replace(config, tau=2.0**-7)
    n_steps = getattr(args, "steps", None) or 1000
    config = replace(config, t_final=n_steps * config.tau)
    validate_config(config, "single")
    backend = make_backend(config.backend, _resolution(config))
    model = _noise_model(config, backend.dim)
    table = (
        sample_increments(model, config.plan(), 0, n_steps, config.tau)
        if model.j_noise > 0
        else np.zeros((n_steps, 0))
    )
    ops = StepOperators(backend, config.tau)
    solver = config.solver()
    u0 = np.zeros(backend.dim)
    u0[0] = 1.0
    x = State(backend.from_modal(u0), backend.from_modal(np.zeros(backend.dim)))
    max_resid = 0.0
    max_allowed = 0.0
    for n in range(n_steps):
        dw = backend.from_modal(backend.project_mode_increment(table[n]))
        x_next, _ = step(x, dw, ops, config.drift, solver)
        resid = float(hamiltonian_residual(x, x_next, dw, config.drift, backend))
        bound = 100.0 * solver.tol * (1.0 + abs(float(energy(x, config.drift, backend))))
        max_resid = max(max_resid, resid)
        max_allowed = max(max_allowed, bound)
        if resid > bound:
            print(
                f"error: EnergyCheckFailure: step {n} residual {resid:.3e} "
                f"exceeds {bound:.3e}",
                file=sys.stderr,
            )
            return 1
        x = x_next
    print(
        f"energy-check: {n_steps} steps, max residual {max_resid:.3e} "
        f"(allowed {max_allowed:.3e})"
    )
    return 0


def _cmd_selftest() -> int:
    from .selftest import run_selftest

    return run_selftest()


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "selftest":
            return _cmd_selftest()
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "rate-time":
            return _cmd_rate(args, "temporal")
        if args.command == "rate-space":
            return _cmd_rate(args, "spatial")
        if args.command == "trace":
            return _cmd_trace(args)
        if args.command == "energy-check":
            return _cmd_energy_check(args)
        raise AssertionError(f"unhandled command {args.command}")
    except (ConfigError, DegenerateStudyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except NonConvergenceError as exc:
        print(f"error: NonConvergenceError: {exc}", file=sys.stderr)
        return 3
    except FloatingPointError as exc:
        print(f"error: SolverDiverged: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: IOError: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
