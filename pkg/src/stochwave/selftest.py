"""Built-in property suite behind the `selftest` subcommand.

Quick, deterministic re-checks of the invariants every module promises;
one line per check, nonzero exit if anything fails.  The pytest suite
is the full gate; this is the single entry point a deployment can run
without test files around.
"""

from __future__ import annotations

import tempfile
from pathlib import Path

import numpy as np

from .backends import SpectralBackend, make_backend
from .fem import Mesh1D, assemble, decompose, uniform_mesh_eigenvalue
from .harness import (
    ExperimentConfig,
    rate_fit,
    read_csv_columns,
    trace_study,
    write_trace_csv,
)
from .noise import NoiseModel, SeedPlan, coarsen_time, sample_increments
from .nonlinearity import CubicDrift
from .stepper import SolverConfig, State, StepOperators, energy, hamiltonian_residual, step


def _check_spectral_roundtrip(rng):
    basis = SpectralBackend(48).basis
    coeffs = rng.standard_normal(48)
    back = basis.analyze(basis.synthesize(coeffs))
    err = np.max(np.abs(back - coeffs)) / np.max(np.abs(coeffs))
    assert err < 1e-13, f"round-trip error {err:.2e}"
    parseval = abs(
        basis.sobolev_norm(coeffs, 0) ** 2
        - np.sum(basis.synthesize(coeffs) ** 2) / (basis.n_nodes + 1)
    )
    assert parseval < 1e-12 * np.sum(coeffs**2), f"Parseval defect {parseval:.2e}"
    return f"round-trip {err:.1e}"


def _check_cubic_projection(rng):
    basis = SpectralBackend(6).basis
    grid = 2.0 * np.sqrt(2.0) * np.sin(np.pi * basis.nodes) ** 3
    coeffs = basis.analyze(grid)
    expect = np.zeros(6)
    expect[0], expect[2] = 1.5, -0.5
    err = np.max(np.abs(coeffs - expect))
    assert err < 1e-13, f"sine-cube projection error {err:.2e}"
    return f"projection {err:.1e}"


def _check_fem(rng):
    mesh = Mesh1D(31)
    ops = decompose(assemble(mesh))
    h = mesh.h
    assert abs(ops.stiffness[0, 0] - 2.0 / h) < 1e-12
    assert abs(ops.mass[0, 1] - h / 6.0) < 1e-15
    closed = [uniform_mesh_eigenvalue(k, h) for k in range(1, 32)]
    rel = np.max(np.abs(ops.eig_values - closed) / closed)
    assert rel < 1e-9, f"eigenvalue mismatch {rel:.2e}"
    gram = ops.eig_vectors.T @ ops.mass @ ops.eig_vectors
    orth = np.max(np.abs(gram - np.eye(31)))
    assert orth < 1e-10, f"orthonormality defect {orth:.2e}"
    return f"eigenvalues {rel:.1e}"


def _check_avf(rng):
    drift = CubicDrift(a3=0.7, a2=-0.4, a1=1.3, a0=0.2, c1_offset=0.1)
    a, b = rng.uniform(-5, 5, 200), rng.uniform(-5, 5, 200)
    sym = np.max(np.abs(drift.avf(a, b) - drift.avf(b, a)))
    gradient = np.max(
        np.abs(drift.avf(a, b) * (b - a) - (drift.eval_F(b) - drift.eval_F(a)))
    )
    diag = np.max(np.abs(drift.avf(a, a) - drift.eval_f(a)))
    assert sym < 1e-12 and gradient < 1e-11 and diag < 1e-12
    return f"gradient identity {gradient:.1e}"


def _check_noise(rng):
    model = NoiseModel(s=0.5005, j_noise=8)
    plan = SeedPlan(4242)
    t1 = sample_increments(model, plan, 3, 64, 2.0**-6)
    t2 = sample_increments(model, plan, 3, 64, 2.0**-6)
    assert np.array_equal(t1, t2), "streams are not reproducible"
    nested = coarsen_time(coarsen_time(t1, 2), 2)
    direct = coarsen_time(t1, 4)
    assert np.array_equal(nested, direct), "dyadic coarsening does not nest"
    return "streams reproducible"


def _check_linear_rotation(rng):
    backend = make_backend("spectral", 5)
    ops = StepOperators(backend, 0.1)
    u0, v0 = rng.standard_normal(5), rng.standard_normal(5)
    out, _ = step(State(u0, v0), None, ops, None)
    root = np.sqrt(backend.eigenvalues)
    u_exact = np.cos(0.1 * root) * u0 + np.sin(0.1 * root) / root * v0
    v_exact = -root * np.sin(0.1 * root) * u0 + np.cos(0.1 * root) * v0
    err = max(np.max(np.abs(out.u - u_exact)), np.max(np.abs(out.v - v_exact)))
    assert err < 1e-13, f"linear rotation error {err:.2e}"
    return f"rotation {err:.1e}"


def _check_energy_identity(rng):
    backend = make_backend("spectral", 24)
    ops = StepOperators(backend, 0.1)
    drift = CubicDrift()
    solver = SolverConfig()
    model = NoiseModel(s=0.5005, j_noise=24)
    worst = 0.0
    for k in range(25):
        u = rng.standard_normal(24) / (1.0 + np.arange(24))
        v = rng.standard_normal(24) / (1.0 + np.arange(24))
        x = State(u, v)
        while float(energy(x, drift, backend)) > 10.0:
            x = State(0.7 * x.u, 0.7 * x.v)
        dw = backend.from_modal(
            backend.project_mode_increment(
                sample_increments(model, SeedPlan(k), 0, 1, 0.1)[0]
            )
        )
        x1, _ = step(x, dw, ops, drift, solver)
        worst = max(worst, float(hamiltonian_residual(x, x1, dw, drift, backend)))
    assert worst < 1e-9, f"energy residual {worst:.2e}"
    return f"residual {worst:.1e}"


def _check_rate_fit(rng):
    slope, _, half = rate_fit([(1.0, 1.0), (0.5, 0.25), (0.25, 0.0625)])
    assert abs(slope - 2.0) < 1e-12 and half < 1e-10
    return "exact power law"


def _check_trace_smoke(rng):
    config = ExperimentConfig(
        modes=8, tau=2.0**-4, samples=128, seed=7, batch_size=32
    )
    report = trace_study(config)
    band = 5.0 * report.stderr[1:] + 1e-12
    off = np.max(np.abs(report.mean_energy[1:] - report.reference[1:]) / band)
    assert off <= 1.0, f"trace deviation {off:.2f} bands"
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "trace.csv"
        write_trace_csv(path, report)
        cols = read_csv_columns(path)
        assert np.array_equal(cols["mean_J"], report.mean_energy), "CSV round trip"
    return "trace within bands"


_CHECKS = (
    ("spectral round trip / Parseval", _check_spectral_roundtrip),
    ("cubic sine projection", _check_cubic_projection),
    ("fem assembly / eigenpairs", _check_fem),
    ("averaged vector field identities", _check_avf),
    ("noise streams / coarsening", _check_noise),
    ("linear one-step rotation", _check_linear_rotation),
    ("pathwise energy identity", _check_energy_identity),
    ("rate fit", _check_rate_fit),
    ("trace formula smoke", _check_trace_smoke),
)


def run_selftest() -> int:
    rng = np.random.default_rng(123456789)
    failures = 0
    for name, check in _CHECKS:
        try:
            detail = check(rng)
            print(f"PASS {name}: {detail}")
        except AssertionError as exc:
            failures += 1
            print(f"FAIL {name}: {exc}")
        except Exception as exc:  # noqa: BLE001 - report, keep going
            failures += 1
            print(f"FAIL {name}: {type(exc).__name__}: {exc}")
    print(f"selftest: {len(_CHECKS) - failures}/{len(_CHECKS)} checks passed")
    return 0 if failures == 0 else 1
