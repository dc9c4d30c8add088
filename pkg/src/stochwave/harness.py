"""Monte Carlo experiment driver: strong errors, rates, energy traces.

Errors are measured at the terminal time against a reference run of the
same scheme at the finest resolution, with common random numbers: every
tested level reuses the reference increment tables through block sums
in time (temporal study) or mode truncation / coarse-mesh projection
(spatial study), so per-sample differences isolate the discretization
error.  The displacement error is the L2 norm, the velocity error the
negative-order norm, and the per-level statistic is the RMS over
samples, which estimates the mean-square error.

Samples are independent work items; they are processed in fixed-size
batches (vectorized over a trailing axis) and batches can be farmed out
to a thread pool.  Each sample's noise comes from its own counter-based
stream and results land in pre-assigned slots, so any worker count
produces identical output.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import scipy.stats

from .backends import Embedding, make_backend
from .nonlinearity import CubicDrift
from .noise import NoiseModel, SeedPlan, coarsen_time, restrict_modes, sample_increments
from .stepper import NonConvergenceError, SolverConfig, State, StepOperators, _step_modal

__all__ = [
    "ConfigError",
    "DegenerateStudyError",
    "ExperimentConfig",
    "RateReport",
    "TraceReport",
    "strong_error",
    "rate_fit",
    "temporal_study",
    "spatial_study",
    "trace_study",
    "write_rates_csv",
    "write_trace_csv",
    "read_csv_columns",
    "write_manifest",
]


class ConfigError(ValueError):
    """Configuration violates a validated model assumption."""


class DegenerateStudyError(RuntimeError):
    """All sampled errors vanish; there is no rate to fit."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one experiment; None fields pick the
    study-specific defaults of the reference setup (unit horizon, zero
    initial data, cubic drift, q_j = lambda_j^(-0.5005))."""

    backend: str = "spectral"
    modes: int = 64
    mesh_exponent: int = 6
    t_final: float = 1.0
    tau: float | None = None
    taus: tuple[float, ...] = (2**-2, 2**-3, 2**-4, 2**-5, 2**-6)
    tau_ref: float = 2**-9
    space_levels: tuple[int, ...] | None = None
    space_ref: int | None = None
    samples: int | None = None
    seed: int = 42
    q_exponent: float = 0.5005
    gamma: float = 1.0
    noise_modes: int | None = None
    drift: CubicDrift | None = field(default_factory=CubicDrift)
    tol: float = 1e-12
    max_iter: int = 100
    damping: float = 1.0
    workers: int = 1
    batch_size: int = 64

    def solver(self) -> SolverConfig:
        return SolverConfig(tol=self.tol, max_iter=self.max_iter, damping=self.damping)

    def plan(self) -> SeedPlan:
        return SeedPlan(self.seed)


_STUDY_DEFAULTS = {
    "temporal": dict(tau=None, samples=200),
    "spatial": dict(tau=2**-8, samples=200),
    "spatial-fem": dict(tau=2**-8, samples=100),
    "trace": dict(tau=2**-6, samples=1000),
    "single": dict(tau=2**-8, samples=1),
}


def resolve_config(config: ExperimentConfig, study: str) -> ExperimentConfig:
    """Fill study-dependent None fields with the reference defaults."""
    key = (
        "spatial-fem" if study == "spatial" and config.backend == "fem" else study
    )
    defaults = _STUDY_DEFAULTS[key]
    updates = {}
    if config.tau is None and "tau" in defaults:
        updates["tau"] = defaults["tau"]
    if config.samples is None:
        updates["samples"] = defaults["samples"]
    if study == "spatial":
        if config.space_levels is None:
            updates["space_levels"] = (
                (4, 8, 16, 32) if config.backend == "spectral" else (2, 3, 4, 5)
            )
        if config.space_ref is None:
            updates["space_ref"] = 256 if config.backend == "spectral" else 8
    return replace(config, **updates)


def _require(condition: bool, message: str):
    if not condition:
        raise ConfigError(message)


def _steps_for(tau: float, t_final: float) -> int:
    n = t_final / tau
    _require(
        abs(n - round(n)) < 1e-9 and round(n) >= 1,
        f"horizon {t_final} is not an integral number of steps of size {tau}",
    )
    return int(round(n))


def _dyadic_factor(coarse: float, fine: float) -> int:
    ratio = coarse / fine
    factor = int(round(ratio))
    _require(
        factor >= 2 and abs(ratio - factor) < 1e-9 and factor & (factor - 1) == 0,
        f"step {coarse} is not a dyadic multiple of the reference {fine}",
    )
    return factor


def validate_config(config: ExperimentConfig, study: str):
    """Hard checks of the model assumptions behind the configuration."""
    _require(config.backend in ("spectral", "fem"), f"unknown backend {config.backend!r}")
    _require(config.t_final > 0.0, "t_final must be positive")
    _require(config.samples is None or config.samples >= 1, "samples must be >= 1")
    _require(config.gamma >= 1.0, "noise regularity requires gamma >= 1")
    _require(config.q_exponent >= 0.0, "q_exponent must be nonnegative")
    if config.noise_modes is not None and config.noise_modes > 0:
        try:
            NoiseModel(config.q_exponent, config.noise_modes, config.gamma).validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    elif config.noise_modes is None:
        try:
            NoiseModel(config.q_exponent, 1, config.gamma).validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    for tau in (config.tau, config.tau_ref, *config.taus):
        if tau is not None:
            _require(0.0 < tau < 2.0, f"solvability requires 0 < tau < 2, got {tau}")
    if study == "temporal":
        _require(len(config.taus) >= 3, "temporal study needs at least 3 step sizes")
        _require(
            min(config.taus) > config.tau_ref,
            "reference step must be strictly finer than every tested step",
        )
        for tau in config.taus:
            _dyadic_factor(tau, config.tau_ref)
            _steps_for(tau, config.t_final)
        _steps_for(config.tau_ref, config.t_final)
    if study == "spatial":
        levels, ref = config.space_levels, config.space_ref
        _require(levels is not None and len(levels) >= 3, "spatial study needs >= 3 levels")
        _require(ref is not None and ref > max(levels), "reference space must be finest")
        _steps_for(config.tau, config.t_final)
    if study in ("trace", "single"):
        _steps_for(config.tau, config.t_final)


def _resolution(config: ExperimentConfig) -> int:
    if config.backend == "spectral":
        return config.modes
    return 2**config.mesh_exponent - 1


def _noise_model(config: ExperimentConfig, default_modes: int) -> NoiseModel:
    j_noise = config.noise_modes if config.noise_modes is not None else default_modes
    return NoiseModel(config.q_exponent, j_noise, config.gamma)


def _project_tables(backend, tables: np.ndarray) -> np.ndarray:
    """(B, N, J_noise) increment tables -> (N, dim, B) modal increments."""
    n_batch, n_steps, _ = tables.shape
    flat = tables.reshape(n_batch * n_steps, -1).T
    proj = backend.project_mode_increment(flat)
    return proj.reshape(backend.dim, n_batch, n_steps).transpose(2, 0, 1)


def _run_endpoint(ops, drift, solver, dw_steps, context: str):
    dim, n_batch = dw_steps.shape[1:]
    u = np.zeros((dim, n_batch))
    v = np.zeros((dim, n_batch))
    for n in range(dw_steps.shape[0]):
        try:
            u, v, _ = _step_modal(u, v, dw_steps[n], ops, drift, solver)
        except NonConvergenceError as exc:
            raise NonConvergenceError(
                f"{context}, step {n}: {exc}", exc.residual, exc.iterations,
                exc.batch_column,
            ) from exc
    return u, v


def _batched(n_samples: int, batch_size: int):
    return [
        range(lo, min(lo + batch_size, n_samples))
        for lo in range(0, n_samples, batch_size)
    ]


def _run_batches(worker, config: ExperimentConfig):
    """Apply worker(ids) over sample batches, optionally in a pool.

    Workers write into disjoint pre-assigned slots, so no aggregation
    lock is needed and any pool width yields identical results.
    """
    batches = _batched(config.samples, config.batch_size)
    if config.workers <= 1:
        for ids in batches:
            worker(ids)
        return
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        futures = [pool.submit(worker, ids) for ids in batches]
        for fut in futures:
            fut.result()


def strong_error(ref_state: State, test_state: State, ref_backend, test_backend=None):
    """Per-sample terminal errors (e_u, e_v).

    The coarse solution is embedded exactly into the reference space
    (zero-padded modes or nested-mesh interpolation), then e_u is the
    L2 norm of the displacement difference and e_v the negative-order
    norm of the velocity difference, both in the reference space so the
    part of the reference the coarse space cannot represent counts.
    Scalars for single states, arrays for batched states.
    """
    if test_backend is None or test_backend is ref_backend:
        u_test, v_test = test_state.u, test_state.v
    else:
        embed = Embedding(test_backend, ref_backend)
        u_test, v_test = embed(test_state.u), embed(test_state.v)
    if u_test.shape != ref_state.u.shape:
        raise ValueError(
            "dimension reconciliation failure: "
            f"{ref_state.u.shape} vs {u_test.shape}"
        )
    e_u = ref_backend.norm(ref_state.u - u_test, 0)
    e_v = ref_backend.norm(ref_state.v - v_test, -1)
    return e_u, e_v


def rate_fit(points):
    """Least-squares slope of log(error) against log(scale).

    Returns (slope, intercept, half_width) where half_width is the 95%
    confidence half-width of the slope from the regression residuals.
    """
    pts = np.asarray([(float(s), float(e)) for s, e in points])
    if pts.shape[0] < 3:
        raise ValueError("rate fit needs at least 3 points")
    if np.any(pts <= 0.0):
        raise ValueError(
            "nonpositive scale or error in rate fit; the experiment is broken"
        )
    x, y = np.log(pts[:, 0]), np.log(pts[:, 1])
    design = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    dof = pts.shape[0] - 2
    residuals = y - design @ coef
    var = float(residuals @ residuals) / dof if dof > 0 else 0.0
    se = np.sqrt(var / np.sum((x - x.mean()) ** 2))
    half_width = float(scipy.stats.t.ppf(0.975, dof) * se) if dof > 0 else 0.0
    return slope, intercept, half_width


@dataclass
class RateReport:
    """Per-level terminal errors and the fitted convergence order."""

    study: str
    levels: list
    scales: np.ndarray
    err_u: np.ndarray
    err_v: np.ndarray
    stderr: np.ndarray
    slope: float
    intercept: float
    half_width: float
    slope_u: float
    slope_v: float

    @property
    def total_error(self) -> np.ndarray:
        return self.err_u + self.err_v


@dataclass
class TraceReport:
    """Sample-mean energy per time against the exact linear growth."""

    times: np.ndarray
    mean_energy: np.ndarray
    stderr: np.ndarray
    reference: np.ndarray
    slope: float
    ref_slope: float
    initial_energy: float


def _finish_rates(study, levels, scales, e_u, e_v) -> RateReport:
    if not (np.any(e_u) or np.any(e_v)):
        raise DegenerateStudyError(
            "degenerate study: every sampled error is exactly zero"
        )
    rms_u = np.sqrt(np.mean(e_u**2, axis=1))
    rms_v = np.sqrt(np.mean(e_v**2, axis=1))
    n = e_u.shape[1]
    # delta-method standard error of rms_u + rms_v
    z = np.zeros_like(e_u)
    if np.all(rms_u > 0):
        z += e_u**2 / (2.0 * rms_u[:, None])
    if np.all(rms_v > 0):
        z += e_v**2 / (2.0 * rms_v[:, None])
    stderr = np.std(z, axis=1, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(len(levels))
    slope, intercept, half = rate_fit(zip(scales, rms_u + rms_v))
    slope_u = rate_fit(zip(scales, rms_u))[0] if np.all(rms_u > 0) else float("nan")
    slope_v = rate_fit(zip(scales, rms_v))[0] if np.all(rms_v > 0) else float("nan")
    return RateReport(
        study=study,
        levels=list(levels),
        scales=np.asarray(scales, dtype=float),
        err_u=rms_u,
        err_v=rms_v,
        stderr=stderr,
        slope=slope,
        intercept=intercept,
        half_width=half,
        slope_u=slope_u,
        slope_v=slope_v,
    )


def temporal_study(config: ExperimentConfig) -> RateReport:
    """Strong error against the fine-step reference on a fixed space.

    Every tested step size replays the reference Brownian paths through
    exact block sums of the same increment tables.
    """
    config = resolve_config(config, "temporal")
    validate_config(config, "temporal")
    backend = make_backend(config.backend, _resolution(config))
    model = _noise_model(config, backend.dim)
    plan, solver = config.plan(), config.solver()
    n_ref = _steps_for(config.tau_ref, config.t_final)
    taus = sorted(config.taus, reverse=True)
    factors = [_dyadic_factor(tau, config.tau_ref) for tau in taus]
    ops_ref = StepOperators(backend, config.tau_ref)
    ops_lv = [StepOperators(backend, tau) for tau in taus]

    e_u = np.zeros((len(taus), config.samples))
    e_v = np.zeros((len(taus), config.samples))

    def worker(ids):
        tables = np.stack(
            [
                sample_increments(model, plan, i, n_ref, config.tau_ref)
                for i in ids
            ]
        )
        dw_ref = _project_tables(backend, tables)
        u_ref, v_ref = _run_endpoint(
            ops_ref, config.drift, solver, dw_ref,
            f"reference tau={config.tau_ref}, samples {ids.start}..{ids.stop - 1}",
        )
        for lv, (tau, factor) in enumerate(zip(taus, factors)):
            coarse = coarsen_time(tables.transpose(1, 0, 2), factor).transpose(1, 0, 2)
            dw = _project_tables(backend, coarse)
            u, v = _run_endpoint(
                ops_lv[lv], config.drift, solver, dw,
                f"tau={tau}, samples {ids.start}..{ids.stop - 1}",
            )
            e_u[lv, ids] = backend.modal_norm(u_ref - u, 0)
            e_v[lv, ids] = backend.modal_norm(v_ref - v, -1)

    _run_batches(worker, config)
    levels = [int(round(np.log2(1.0 / tau))) for tau in taus]
    return _finish_rates("temporal", levels, taus, e_u, e_v)


def spatial_study(config: ExperimentConfig) -> RateReport:
    """Strong error against the fine-space reference at a fixed step.

    Spectral levels see the leading modes of the reference noise table;
    finite element levels project the full table onto each mesh.  Each
    tested endpoint is embedded exactly into the reference space and the
    error norms are taken there.
    """
    config = resolve_config(config, "spatial")
    validate_config(config, "spatial")
    spectral = config.backend == "spectral"
    to_res = (lambda lv: lv) if spectral else (lambda lv: 2**lv - 1)
    ref_backend = make_backend(config.backend, to_res(config.space_ref))
    level_backends = [
        make_backend(config.backend, to_res(lv)) for lv in config.space_levels
    ]
    embeddings = [Embedding(b, ref_backend) for b in level_backends]
    model = _noise_model(config, ref_backend.dim)
    if spectral:
        _require(
            model.j_noise >= max(config.space_levels),
            "noise_modes must cover every tested spectral level",
        )
    plan, solver = config.plan(), config.solver()
    n_steps = _steps_for(config.tau, config.t_final)
    ops_ref = StepOperators(ref_backend, config.tau)
    ops_lv = [StepOperators(b, config.tau) for b in level_backends]

    e_u = np.zeros((len(level_backends), config.samples))
    e_v = np.zeros((len(level_backends), config.samples))

    def worker(ids):
        tables = np.stack(
            [sample_increments(model, plan, i, n_steps, config.tau) for i in ids]
        )
        dw_ref = _project_tables(ref_backend, tables)
        u_ref, v_ref = _run_endpoint(
            ops_ref, config.drift, solver, dw_ref,
            f"reference space, samples {ids.start}..{ids.stop - 1}",
        )
        u_ref_nat = ref_backend.from_modal(u_ref)
        v_ref_nat = ref_backend.from_modal(v_ref)
        for lv, backend in enumerate(level_backends):
            if spectral:
                sub = np.stack(
                    [restrict_modes(t, backend.dim) for t in tables]
                )
            else:
                sub = tables
            dw = _project_tables(backend, sub)
            u, v = _run_endpoint(
                ops_lv[lv], config.drift, solver, dw,
                f"level {config.space_levels[lv]}, samples {ids.start}..{ids.stop - 1}",
            )
            du = u_ref_nat - embeddings[lv](backend.from_modal(u))
            dv = v_ref_nat - embeddings[lv](backend.from_modal(v))
            e_u[lv, ids] = ref_backend.norm(du, 0)
            e_v[lv, ids] = ref_backend.norm(dv, -1)

    _run_batches(worker, config)
    scales = [b.scale for b in level_backends]
    return _finish_rates("spatial", list(config.space_levels), scales, e_u, e_v)


def trace_study(config: ExperimentConfig) -> TraceReport:
    """Sample-mean energy along the trajectory against the exact line.

    The discrete scheme adds exactly half the projected covariance
    trace per unit time to the expected energy, so the sample means are
    compared with E[J_0] + (t/2) tr(P Q P).
    """
    config = resolve_config(config, "trace")
    validate_config(config, "trace")
    backend = make_backend(config.backend, _resolution(config))
    model = _noise_model(config, backend.dim)
    plan, solver = config.plan(), config.solver()
    n_steps = _steps_for(config.tau, config.t_final)
    ops = StepOperators(backend, config.tau)
    c1 = config.drift.c1_offset if config.drift is not None else 0.0

    energies = np.zeros((n_steps + 1, config.samples))

    def worker(ids):
        tables = np.stack(
            [sample_increments(model, plan, i, n_steps, config.tau) for i in ids]
        )
        dw = _project_tables(backend, tables)
        dim, n_batch = backend.dim, len(ids)
        u = np.zeros((dim, n_batch))
        v = np.zeros((dim, n_batch))
        energies[0, ids] = _modal_energy(backend, u, v, config.drift, c1)
        for n in range(n_steps):
            try:
                u, v, _ = _step_modal(u, v, dw[n], ops, config.drift, solver)
            except NonConvergenceError as exc:
                raise NonConvergenceError(
                    f"samples {ids.start}..{ids.stop - 1}, step {n}: {exc}",
                    exc.residual, exc.iterations, exc.batch_column,
                ) from exc
            energies[n + 1, ids] = _modal_energy(backend, u, v, config.drift, c1)

    _run_batches(worker, config)
    times = np.arange(n_steps + 1) * config.tau
    mean = energies.mean(axis=1)
    stderr = (
        energies.std(axis=1, ddof=1) / np.sqrt(config.samples)
        if config.samples > 1
        else np.zeros_like(mean)
    )
    ref_slope = 0.5 * backend.noise_trace(model)
    j0 = float(mean[0])
    reference = j0 + ref_slope * times
    design = np.column_stack([times, np.ones_like(times)])
    coef, *_ = np.linalg.lstsq(design, mean, rcond=None)
    return TraceReport(
        times=times,
        mean_energy=mean,
        stderr=stderr,
        reference=reference,
        slope=float(coef[0]),
        ref_slope=ref_slope,
        initial_energy=j0,
    )


def _modal_energy(backend, u, v, drift, c1):
    total = 0.5 * backend.modal_norm(u, 1) ** 2 + 0.5 * backend.modal_norm(v, 0) ** 2
    if drift is not None:
        total = total + backend.potential_from_modal(u, drift) + c1
    return total


def _fmt(value) -> str:
    return repr(float(value))


def write_rates_csv(path, report: RateReport):
    lines = ["level,scale,err_u,err_v,stderr"]
    for level, scale, eu, ev, se in zip(
        report.levels, report.scales, report.err_u, report.err_v, report.stderr
    ):
        lines.append(
            f"{level},{_fmt(scale)},{_fmt(eu)},{_fmt(ev)},{_fmt(se)}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_trace_csv(path, report: TraceReport):
    lines = ["t,mean_J,stderr,reference"]
    for t, mj, se, ref in zip(
        report.times, report.mean_energy, report.stderr, report.reference
    ):
        lines.append(f"{_fmt(t)},{_fmt(mj)},{_fmt(se)},{_fmt(ref)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv_columns(path) -> dict[str, np.ndarray]:
    """Re-parse an emitted CSV into named float columns (level stays int)."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    out = {}
    for idx, name in enumerate(header):
        col = [row[idx] for row in rows]
        if name == "level":
            out[name] = np.array([int(c) for c in col])
        else:
            out[name] = np.array([float(c) for c in col])
    return out


def config_as_dict(config: ExperimentConfig) -> dict:
    raw = asdict(config)
    raw["drift"] = None if config.drift is None else asdict(config.drift)
    for key, value in raw.items():
        if isinstance(value, tuple):
            raw[key] = list(value)
    return raw


def write_manifest(path, command: str, config: ExperimentConfig, results: dict,
                   outputs: list[str]):
    payload = {
        "command": command,
        "config": config_as_dict(config),
        "build": _build_identifier(),
        "results": results,
        "outputs": outputs,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _build_identifier() -> dict:
    from . import __version__

    ident = {"package": "stochwave", "version": __version__}
    try:
        import subprocess

        head = subprocess.run(
            ["git", "rev-parse", "HEAD"],
            capture_output=True, text=True, timeout=5,
        )
        ident["revision"] = head.stdout.strip() if head.returncode == 0 else None
    except Exception:
        ident["revision"] = None
    return ident
