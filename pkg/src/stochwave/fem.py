"""Piecewise-linear finite elements on a uniform mesh of (0, 1).

Hat functions on n interior nodes with zero boundary values.  The
discrete Laplacian is the pencil (S, M) of stiffness and mass matrices;
its generalized eigenpairs (mu_k, psi_k) with Psi^T M Psi = I give the
spectral calculus used by the exponential time stepper, and the modal
coefficients c = Psi^T M u make the mass norm a plain 2-norm.

Nodal fields are plain arrays of interior node values, shape (n,) or
(n, B) with a trailing batch axis.  Quadrature values live on a fixed
per-element Gauss rule that integrates quartics of piecewise linears
exactly, so L2 projections of cubic nonlinearities carry no quadrature
error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "Mesh1D",
    "FemOperators",
    "assemble",
    "decompose",
    "project_sine_mode",
    "apply_fem_function",
    "fem_norm",
    "uniform_mesh_eigenvalue",
]

# 4-point Gauss-Legendre rule on the reference element [0, 1]
_GX, _GW = np.polynomial.legendre.leggauss(4)
GAUSS_POINTS = (_GX + 1.0) / 2.0
GAUSS_WEIGHTS = _GW / 2.0
GAUSS_POINTS.flags.writeable = False
GAUSS_WEIGHTS.flags.writeable = False


@dataclass(frozen=True)
class Mesh1D:
    """Uniform mesh with n_interior free nodes, width h = 1/(n+1)."""

    n_interior: int

    def __post_init__(self):
        if self.n_interior < 1:
            raise ValueError("mesh needs at least one interior node")

    @property
    def h(self) -> float:
        return 1.0 / (self.n_interior + 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(1, self.n_interior + 1) * self.h


@dataclass(frozen=True)
class FemOperators:
    """Assembled matrices, plus eigenpairs once decomposed.

    eig_vectors is M-orthonormal (Psi^T M Psi = I) and simultaneously
    diagonalizes the stiffness matrix (Psi^T S Psi = diag(eig_values)).
    """

    mass: np.ndarray
    stiffness: np.ndarray
    eig_values: np.ndarray | None = None
    eig_vectors: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.mass.shape[0]

    def require_eig(self):
        if self.eig_values is None:
            raise ValueError("operators not decomposed; call decompose() first")


def _tridiag(n: int, diag: float, off: float) -> np.ndarray:
    a = np.diag(np.full(n, diag))
    if n > 1:
        a += np.diag(np.full(n - 1, off), 1) + np.diag(np.full(n - 1, off), -1)
    return a


def assemble(mesh: Mesh1D) -> FemOperators:
    """Exact hat-function mass and stiffness matrices."""
    h = mesh.h
    stiffness = _tridiag(mesh.n_interior, 2.0 / h, -1.0 / h)
    mass = _tridiag(mesh.n_interior, 2.0 * h / 3.0, h / 6.0)
    for a in (stiffness, mass):
        a.flags.writeable = False
    return FemOperators(mass=mass, stiffness=stiffness)


def decompose(ops: FemOperators) -> FemOperators:
    """Generalized symmetric-definite eigendecomposition of (S, M).

    Dense solve; scipy returns M-orthonormal eigenvectors in ascending
    eigenvalue order.  Signs are fixed so the first component of every
    eigenvector is positive, which keeps runs reproducible.
    """
    mu, psi = scipy.linalg.eigh(ops.stiffness, ops.mass)
    if not np.all(mu > 0.0):
        raise np.linalg.LinAlgError("discrete Laplacian is not positive definite")
    flip = np.where(psi[0, :] < 0.0, -1.0, 1.0)
    psi = psi * flip
    mu.flags.writeable = False
    psi.flags.writeable = False
    return FemOperators(
        mass=ops.mass, stiffness=ops.stiffness, eig_values=mu, eig_vectors=psi
    )


def uniform_mesh_eigenvalue(k: int, h: float) -> float:
    """Closed-form k-th eigenvalue of (S, M) on a uniform mesh."""
    c = np.cos(k * np.pi * h)
    return 6.0 / h**2 * (1.0 - c) / (2.0 + c)


def sine_load_vector(j, mesh: Mesh1D) -> np.ndarray:
    """Exact loads b_i = int sqrt(2) sin(j pi x) phi_i(x) dx.

    Closed form from the antiderivative of sine against a hat:
    b_i = sqrt(2) * 2 (1 - cos(j pi h)) / (h (j pi)^2) * sin(j pi x_i).
    Accepts a scalar mode index or an array of indices (giving one
    column per mode).
    """
    j = np.asarray(j, dtype=float)
    if np.any(j < 1):
        raise ValueError("mode index must be >= 1")
    h = mesh.h
    amp = np.sqrt(2.0) * 2.0 * (1.0 - np.cos(j * np.pi * h)) / (h * (j * np.pi) ** 2)
    table = np.sin(np.outer(mesh.nodes, np.atleast_1d(j)) * np.pi) * np.atleast_1d(amp)
    return table[:, 0] if j.ndim == 0 else table


def project_sine_mode(j: int, ops: FemOperators, mesh: Mesh1D) -> np.ndarray:
    """Nodal values of the L2 projection of sqrt(2) sin(j pi x)."""
    b = sine_load_vector(j, mesh)
    return scipy.linalg.solve(ops.mass, b, assume_a="pos")


def apply_fem_function(f: np.ndarray, fn, ops: FemOperators) -> np.ndarray:
    """Apply fn of the discrete Laplacian to a nodal field.

    Computed as Psi fn(mu) Psi^T M f in modal coordinates.
    """
    ops.require_eig()
    weights = np.broadcast_to(
        np.asarray(fn(ops.eig_values), dtype=float), (ops.n,)
    )
    if not np.all(np.isfinite(weights)):
        raise ValueError("spectral function produced non-finite values")
    modal = ops.eig_vectors.T @ (ops.mass @ f)
    scaled = weights * modal if modal.ndim == 1 else weights[:, None] * modal
    return ops.eig_vectors @ scaled


def fem_norm(f: np.ndarray, order: int, ops: FemOperators):
    """Discrete Sobolev norm of a nodal field for order in {-1, 0, 1}.

    order=0 is the mass norm (L2), order=1 the stiffness norm (H1_0
    seminorm) and order=-1 the negative norm with modal weights 1/mu_k.
    """
    f = np.asarray(f, dtype=float)
    if order == 0:
        w = ops.mass @ f
    elif order == 1:
        w = ops.stiffness @ f
    elif order == -1:
        ops.require_eig()
        modal = ops.eig_vectors.T @ (ops.mass @ f)
        sq = modal**2 / (
            ops.eig_values if modal.ndim == 1 else ops.eig_values[:, None]
        )
        out = np.sqrt(np.sum(sq, axis=0))
        return float(out) if f.ndim == 1 else out
    else:
        raise ValueError(f"unsupported norm order {order}; use -1, 0 or 1")
    out = np.sqrt(np.sum(f * w, axis=0))
    return float(out) if f.ndim == 1 else out


def values_at_quadrature(f: np.ndarray, mesh: Mesh1D) -> np.ndarray:
    """Field values at every element Gauss point, flattened.

    Output shape ((n+1)*Q, ...) for Q points per element, ordered
    element by element.
    """
    f = np.asarray(f, dtype=float)
    zero = np.zeros((1,) + f.shape[1:])
    ext = np.concatenate([zero, f, zero], axis=0)
    left, right = ext[:-1], ext[1:]
    xi = GAUSS_POINTS
    if f.ndim == 1:
        vals = left[:, None] * (1.0 - xi) + right[:, None] * xi
        return vals.reshape(-1)
    vals = left[:, None, :] * (1.0 - xi)[None, :, None] + right[:, None, :] * xi[
        None, :, None
    ]
    return vals.reshape(-1, f.shape[1])


def load_from_quadrature(values: np.ndarray, mesh: Mesh1D) -> np.ndarray:
    """Hat-function load vector from Gauss-point integrand values.

    b_i = int g phi_i dx assembled from the two elements sharing node
    i; exact whenever g is a polynomial of degree <= 7 per element.
    """
    values = np.asarray(values, dtype=float)
    n_el = mesh.n_interior + 1
    q = GAUSS_POINTS.size
    vals = values.reshape((n_el, q) + values.shape[1:])
    wl = mesh.h * GAUSS_WEIGHTS * (1.0 - GAUSS_POINTS)
    wr = mesh.h * GAUSS_WEIGHTS * GAUSS_POINTS
    if values.ndim == 1:
        left = vals @ wl
        right = vals @ wr
    else:
        left = np.einsum("eqb,q->eb", vals, wl)
        right = np.einsum("eqb,q->eb", vals, wr)
    return right[:-1] + left[1:]


def integrate_drift_potential(f: np.ndarray, drift, mesh: Mesh1D):
    """Exact integral of drift.eval_F over (0, 1) for a nodal field."""
    f = np.asarray(f, dtype=float)
    vals = drift.eval_F(values_at_quadrature(f, mesh))
    n_el = mesh.n_interior + 1
    q = GAUSS_POINTS.size
    vals = vals.reshape((n_el, q) + f.shape[1:])
    if f.ndim == 1:
        return float(mesh.h * (vals @ GAUSS_WEIGHTS).sum())
    return mesh.h * np.einsum("eqb,q->b", vals, GAUSS_WEIGHTS)
