"""Exponential time stepper with an averaged-vector-field implicit term.

One step of size tau maps (U^n, V^n) to (U^{n+1}, V^{n+1}) through the
wave phase operators applied mode by mode,

    U^{n+1} = cos(tau L^1/2) U^n + L^-1/2 sin(tau L^1/2) V^n
              - L^-1 (1 - cos(tau L^1/2)) P g,
    V^{n+1} = -L^1/2 sin(tau L^1/2) U^n + cos(tau L^1/2) V^n
              - L^-1/2 sin(tau L^1/2) P g + P dW^n,

where L is the discrete Laplacian, P the L2 projection onto the space
and g the averaged vector field of the drift between U^n and U^{n+1},
so the update is implicit in U only.  Evaluating g once and reusing the
identical object in both updates is what makes the step conserve the
energy functional exactly along every path once the noise part of the
velocity is subtracted:

    J(U^{n+1}, V^{n+1} - P dW^n) = J(U^n, V^n).

The implicit equation is solved by damped fixed-point iteration started
from the linear predictor; the iteration is a contraction for the step
sizes used here (the scheme itself is uniquely solvable for tau < 2,
which the operator table enforces).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nonlinearity import CubicDrift

__all__ = [
    "SolverConfig",
    "NonConvergenceError",
    "State",
    "StepOperators",
    "step",
    "energy",
    "hamiltonian_residual",
    "trajectory",
]


@dataclass(frozen=True)
class SolverConfig:
    """Fixed-point solve controls; the residual is the coefficient 2-norm."""

    tol: float = 1e-12
    max_iter: int = 100
    damping: float = 1.0

    def __post_init__(self):
        if not self.tol > 0.0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")


class NonConvergenceError(RuntimeError):
    """Implicit solve did not reach tolerance within max_iter."""

    def __init__(self, message, residual, iterations, batch_column=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.batch_column = batch_column


@dataclass
class State:
    """Displacement/velocity pair in the backend's native representation.

    Arrays of shape (dim,) for a single path or (dim, B) for a batch.
    """

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.u.shape != self.v.shape:
            raise ValueError("displacement and velocity shapes differ")

    def copy(self) -> "State":
        return State(self.u.copy(), self.v.copy())

    @staticmethod
    def zero(backend, batch: int | None = None) -> "State":
        shape = (backend.dim,) if batch is None else (backend.dim, batch)
        return State(np.zeros(shape), np.zeros(shape))


class StepOperators:
    """Per-mode trig functions of the discrete Laplacian for one tau.

    The 1 - cos combination is evaluated as 2 sin^2(tau sqrt(lam)/2) to
    stay accurate as tau -> 0.  Step sizes need |tau| < 2 for unique
    solvability of the implicit stage; negative tau is allowed so the
    reversibility of the deterministic flow can be exercised.
    """

    def __init__(self, backend, tau: float):
        if tau == 0.0 or not abs(tau) < 2.0:
            raise ValueError("step size must satisfy 0 < |tau| < 2 (solvability)")
        self.backend = backend
        self.tau = float(tau)
        root = np.sqrt(backend.eigenvalues)
        phase = self.tau * root
        self.cos_op = np.cos(phase)
        self.sin_op = np.sin(phase)
        self.lam_inv_half_sin = self.sin_op / root
        self.lam_inv_one_minus_cos = 2.0 * np.sin(phase / 2.0) ** 2 / (root * root)
        self.lam_half_sin = root * self.sin_op
        for a in (
            self.cos_op,
            self.sin_op,
            self.lam_inv_half_sin,
            self.lam_inv_one_minus_cos,
            self.lam_half_sin,
        ):
            a.flags.writeable = False


def _col(op: np.ndarray, arr: np.ndarray) -> np.ndarray:
    return op * arr if arr.ndim == 1 else op[:, None] * arr


def _step_modal(u, v, dw, ops: StepOperators, drift, solver: SolverConfig):
    """One step in modal coordinates; returns (u1, v1, iterations).

    u, v, dw have shape (dim, B); iterations has shape (B,).
    """
    backend = ops.backend
    pred = _col(ops.cos_op, u) + _col(ops.lam_inv_half_sin, v)
    n_batch = u.shape[1]
    iters = np.zeros(n_batch, dtype=int)

    if drift is None:
        u_next = pred
        g_acc = np.zeros_like(u)
    else:
        u_next = np.empty_like(pred)
        g_acc = np.empty_like(pred)
        quad_n = backend.to_quadrature(u)
        w = pred.copy()
        active = np.arange(n_batch)
        quad_act, pred_act = quad_n, pred
        for k in range(1, solver.max_iter + 1):
            g = backend.project_quadrature(
                drift.avf_field(quad_act, backend.to_quadrature(w))
            )
            cand = pred_act - _col(ops.lam_inv_one_minus_cos, g)
            if not np.all(np.isfinite(cand)):
                raise FloatingPointError(
                    "non-finite intermediate in the implicit solve"
                )
            shift = cand - w
            residual = np.sqrt(np.sum(shift**2, axis=0))
            done = residual <= solver.tol
            if np.any(done):
                cols = active[done]
                u_next[:, cols] = cand[:, done]
                g_acc[:, cols] = g[:, done]
                iters[cols] = k
                if np.all(done):
                    break
                keep = ~done
                active = active[keep]
                residual = residual[keep]
                w = w[:, keep] + solver.damping * shift[:, keep]
                quad_act = quad_act[:, keep]
                pred_act = pred_act[:, keep]
            else:
                w = w + solver.damping * shift
        else:
            worst = int(np.argmax(residual))
            raise NonConvergenceError(
                f"implicit solve stalled at residual {residual[worst]:.3e} "
                f"after {solver.max_iter} iterations (tol {solver.tol:.1e})",
                residual=float(residual[worst]),
                iterations=solver.max_iter,
                batch_column=int(active[worst]),
            )

    v_next = (
        -_col(ops.lam_half_sin, u)
        + _col(ops.cos_op, v)
        - _col(ops.lam_inv_half_sin, g_acc)
        + dw
    )
    return u_next, v_next, iters


def step(
    x: State,
    dw,
    ops: StepOperators,
    drift: CubicDrift | None,
    solver: SolverConfig | None = None,
):
    """Advance one step; dw is the projected noise increment (a field).

    Returns (next_state, iteration_count); the count is the number of
    averaged-vector-field evaluations spent on the implicit solve, and
    the converged field is reused as-is in the velocity update.
    """
    solver = solver or SolverConfig()
    backend = ops.backend
    single = x.u.ndim == 1
    u = backend.to_modal(x.u)
    v = backend.to_modal(x.v)
    dw = backend.to_modal(np.zeros_like(x.u) if dw is None else dw)
    if single:
        u, v, dw = u[:, None], v[:, None], dw[:, None]
    u1, v1, iters = _step_modal(u, v, dw, ops, drift, solver)
    if single:
        u1, v1 = u1[:, 0], v1[:, 0]
        iters = int(iters[0])
    out = State(backend.from_modal(u1), backend.from_modal(v1))
    return out, iters


def energy(x: State, drift: CubicDrift | None, backend):
    """Energy functional: elastic + kinetic + drift potential + offset."""
    elastic = backend.norm(x.u, 1)
    kinetic = backend.norm(x.v, 0)
    total = 0.5 * elastic**2 + 0.5 * kinetic**2
    if drift is not None:
        total = total + backend.integrate_drift_potential(x.u, drift) + drift.c1_offset
    return total


def hamiltonian_residual(
    x_n: State, x_next: State, dw, drift: CubicDrift | None, backend
):
    """Path-wise energy defect of one accepted step.

    The step conserves J(U, V - P dW) exactly up to the solver
    tolerance, so this is |J(U^{n+1}, V^{n+1} - P dW) - J(U^n, V^n)|.
    """
    dw = np.zeros_like(x_next.v) if dw is None else np.asarray(dw, dtype=float)
    shifted = State(x_next.u, x_next.v - dw)
    return np.abs(energy(shifted, drift, backend) - energy(x_n, drift, backend))


def trajectory(
    x0: State,
    increments,
    ops: StepOperators,
    drift: CubicDrift | None,
    solver: SolverConfig | None = None,
):
    """Iterate the one-step map over an increment table.

    increments has one row per step in the sine-mode basis of the noise
    (projection onto the space happens here); returns the N+1 states at
    t_0..t_N.
    """
    solver = solver or SolverConfig()
    increments = np.asarray(increments, dtype=float)
    if increments.ndim != 2:
        raise ValueError("increment table must be 2-dimensional")
    states = [x0.copy()]
    x = x0
    for n in range(increments.shape[0]):
        dw = ops.backend.from_modal(
            ops.backend.project_mode_increment(increments[n])
        )
        try:
            x, _ = step(x, dw, ops, drift, solver)
        except NonConvergenceError as exc:
            raise NonConvergenceError(
                f"step {n}: {exc}", exc.residual, exc.iterations
            ) from exc
        states.append(x)
    return states
