"""Acceptance suite: the contract checks for the whole package.

Each test prints one PASS/FAIL line (run with `pytest -s` to see them on
success).  The statistical studies use the pinned default seed; their
thresholds are the stated acceptance tolerances, not tuned values.
"""

import numpy as np
import pytest
from scipy.optimize import brentq

from stochwave import (
    CubicDrift,
    ExperimentConfig,
    NoiseModel,
    SeedPlan,
    SolverConfig,
    State,
    StepOperators,
    energy,
    hamiltonian_residual,
    make_backend,
    sample_increments,
    spatial_study,
    step,
    temporal_study,
    trace_study,
    trajectory,
)

GL_X, GL_W = np.polynomial.legendre.leggauss(64)
THETA = (GL_X + 1.0) / 2.0
THETA_W = GL_W / 2.0


def _report(name: str, passed: bool, detail: str):
    print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    assert passed, f"{name}: {detail}"


def _random_state(backend, rng, drift, max_energy=10.0):
    decay = 1.0 + np.arange(backend.dim)
    x = State(
        rng.standard_normal(backend.dim) / decay,
        rng.standard_normal(backend.dim) / decay,
    )
    while float(energy(x, drift, backend)) > max_energy:
        x = State(0.7 * x.u, 0.7 * x.v)
    return x


def test_criterion_1_pathwise_hamiltonian_identity():
    backend = make_backend("spectral", 64)
    ops = StepOperators(backend, 0.1)
    drift = CubicDrift()
    solver = SolverConfig(tol=1e-12)
    model = NoiseModel(s=0.5005, j_noise=64)
    plan = SeedPlan(101)
    rng = np.random.default_rng(101)
    worst = 0.0
    for k in range(200):
        x = _random_state(backend, rng, drift)
        dw = backend.project_mode_increment(
            sample_increments(model, plan, k, 1, 0.1)[0]
        )
        x1, iters = step(x, dw, ops, drift, solver)
        assert iters <= 30
        worst = max(worst, float(hamiltonian_residual(x, x1, dw, drift, backend)))
    _report(
        "criterion 1: pathwise energy identity",
        worst <= 1e-9,
        f"max residual {worst:.3e} (allowed 1e-09) over 200 noisy steps",
    )


def test_criterion_2_deterministic_energy_conservation():
    backend = make_backend("spectral", 64)
    ops = StepOperators(backend, 2.0**-7)
    drift = CubicDrift()
    solver = SolverConfig(tol=1e-12)
    u0 = np.zeros(64)
    u0[0] = 1.0
    x = State(u0, np.zeros(64))
    j0 = float(energy(x, drift, backend))
    worst = 0.0
    for _ in range(1000):
        x, _ = step(x, None, ops, drift, solver)
        worst = max(worst, abs(float(energy(x, drift, backend)) - j0))
    _report(
        "criterion 2: deterministic conservation",
        worst <= 1e-8,
        f"max |J_n - J_0| = {worst:.3e} over 1000 steps (allowed 1e-08)",
    )


def test_criterion_3_discrete_trace_formula():
    config = ExperimentConfig(modes=64, tau=2.0**-6, samples=1000, batch_size=125)
    report = trace_study(config)
    dev = np.abs(report.mean_energy[1:] - report.reference[1:]) / report.stderr[1:]
    slope_err = abs(report.slope / report.ref_slope - 1.0)
    _report(
        "criterion 3: trace formula",
        float(dev.max()) <= 3.0 and slope_err <= 0.05,
        f"max deviation {dev.max():.2f} stderr (allowed 3), "
        f"slope off by {100 * slope_err:.2f}% (allowed 5%)",
    )


def test_criterion_4_temporal_strong_rate():
    config = ExperimentConfig(modes=64, samples=200, batch_size=100)
    report = temporal_study(config)
    _report(
        "criterion 4: temporal rate",
        0.8 <= report.slope <= 1.2,
        f"fitted slope {report.slope:.3f} (window [0.8, 1.2])",
    )


def test_criterion_5_spatial_strong_rate_spectral():
    config = ExperimentConfig(samples=200, batch_size=100)
    report = spatial_study(config)
    _report(
        "criterion 5: spatial rate, spectral",
        0.8 <= report.slope <= 1.2,
        f"fitted slope {report.slope:.3f} (window [0.8, 1.2])",
    )


def test_criterion_6_spatial_strong_rate_fem():
    config = ExperimentConfig(backend="fem", samples=100, batch_size=50)
    report = spatial_study(config)
    _report(
        "criterion 6: spatial rate, finite elements",
        report.slope >= 0.55,
        f"fitted slope {report.slope:.3f} (theory 2/3, floor 0.55)",
    )


def test_criterion_7_single_mode_oracle():
    backend = make_backend("spectral", 1)
    drift = CubicDrift()
    solver = SolverConfig(tol=1e-12)
    rng = np.random.default_rng(107)
    worst = 0.0
    for _ in range(1000):
        tau = rng.uniform(0.02, 0.5)
        ops = StepOperators(backend, tau)
        cu, cv = rng.uniform(-2.0, 2.0, 2)
        out, _ = step(State(np.array([cu]), np.array([cv])), None, ops, drift, solver)

        grid_u = backend.to_quadrature(np.array([cu]))
        pred = ops.cos_op[0] * cu + ops.lam_inv_half_sin[0] * cv
        weight = ops.lam_inv_one_minus_cos[0]

        def implicit(w):
            g = backend.project_quadrature(
                drift.avf_field(grid_u, backend.to_quadrature(np.array([w])))
            )[0]
            return w - pred + weight * g

        width = 1.0 + abs(pred)
        while implicit(pred - width) > 0 or implicit(pred + width) < 0:
            width *= 2.0
        oracle = brentq(implicit, pred - width, pred + width, xtol=1e-14)
        worst = max(worst, abs(out.u[0] - oracle))
    _report(
        "criterion 7: single-mode root-finder oracle",
        worst <= 1e-10,
        f"max |step - oracle| = {worst:.3e} over 1000 draws (allowed 1e-10)",
    )


def test_criterion_8_avf_exactness():
    drift = CubicDrift()
    rng = np.random.default_rng(108)
    a = rng.uniform(-5.0, 5.0, 10_000)
    b = rng.uniform(-5.0, 5.0, 10_000)
    closed = drift.avf(a, b)
    quadrature = drift.eval_f(a[:, None] + THETA[None, :] * (b - a)[:, None]) @ THETA_W
    quad_gap = float(np.max(np.abs(closed - quadrature)))

    lhs = drift.eval_F(b) - drift.eval_F(a)
    rhs = closed * (b - a)
    grad_gap = float(np.max(np.abs(lhs - rhs) / (1e-13 + np.abs(lhs))))
    passed = quad_gap <= 1e-12 and np.allclose(lhs, rhs, rtol=1e-13, atol=1e-13)
    _report(
        "criterion 8: averaged vector field exactness",
        passed,
        f"max quadrature gap {quad_gap:.2e} (allowed 1e-12), "
        f"gradient identity within {grad_gap:.2e} relative",
    )


def test_criterion_9_linear_exactness():
    backend = make_backend("spectral", 16)
    tau = 2.0**-5
    ops = StepOperators(backend, tau)
    model = NoiseModel(s=0.5005, j_noise=16)
    table = sample_increments(model, SeedPlan(109), 0, 100, tau)
    states = trajectory(State.zero(backend), table, ops, None)

    root = np.sqrt(backend.eigenvalues)
    c, s = np.cos(tau * root), np.sin(tau * root)
    u = np.zeros(16)
    v = np.zeros(16)
    worst = 0.0
    for n in range(100):
        u, v = c * u + s / root * v, -root * s * u + c * v + table[n]
        worst = max(
            worst,
            float(np.max(np.abs(states[n + 1].u - u))),
            float(np.max(np.abs(states[n + 1].v - v))),
        )
    _report(
        "criterion 9: linear exactness",
        worst <= 1e-13,
        f"max gap to mode recursion {worst:.3e} over 100 steps (allowed 1e-13)",
    )


def test_criterion_10_optional_velocity_rate():
    config = ExperimentConfig(
        modes=64, samples=200, batch_size=100, q_exponent=1.5005, gamma=2.0
    )
    report = temporal_study(config)
    _report(
        "criterion 10 (optional): velocity temporal rate",
        0.75 <= report.slope_v <= 1.25,
        f"fitted velocity slope {report.slope_v:.3f} (window [0.75, 1.25])",
    )
