"""Uniform interface over the spectral and finite element spaces.

The time stepper only needs a handful of operations: a transform
between the native field representation and modal coordinates in which
the discrete Laplacian is diagonal and the mass inner product is the
plain dot product, pointwise evaluation at quadrature points for the
cubic term, the exact L2 projection back, and the projection of sine
mode noise increments into the space.

Native fields are sine coefficients for the spectral space and interior
node values for the finite element space; modal coordinates coincide
with the native ones in the spectral case.  Everything accepts an
optional trailing batch axis.
"""

from __future__ import annotations

import numpy as np

from . import fem
from .spectral import SpectralBasis

__all__ = ["SpectralBackend", "FemBackend", "Embedding", "make_backend"]


class SpectralBackend:
    """Sine eigenbasis space; modal and native representations agree."""

    kind = "spectral"

    def __init__(self, n_modes: int):
        self.basis = SpectralBasis(n_modes)

    @property
    def dim(self) -> int:
        return self.basis.n_modes

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.basis.eigenvalues

    @property
    def scale(self) -> float:
        return self.basis.mesh_parameter

    def to_modal(self, field):
        return np.asarray(field, dtype=float)

    def from_modal(self, modal):
        return np.asarray(modal, dtype=float)

    def to_quadrature(self, modal):
        return self.basis.synthesize(modal)

    def project_quadrature(self, values):
        return self.basis.analyze(values)

    def project_mode_increment(self, row):
        """Modal coordinates of the projected sine-mode increment."""
        row = np.asarray(row, dtype=float)
        keep = min(self.dim, row.shape[0])
        out = np.zeros((self.dim,) + row.shape[1:])
        out[:keep] = row[:keep]
        return out

    def noise_trace(self, model) -> float:
        """Trace of the projected covariance on this space."""
        keep = min(self.dim, model.j_noise)
        return float(np.sum(model.q[:keep]))

    def norm(self, field, order: float):
        return self.basis.sobolev_norm(field, order)

    def modal_norm(self, modal, order: float):
        return self.basis.sobolev_norm(modal, order)

    def integrate_drift_potential(self, field, drift):
        return self.basis.integrate_drift_potential(field, drift)

    def potential_from_modal(self, modal, drift):
        return self.basis.integrate_drift_potential(modal, drift)


class FemBackend:
    """Piecewise-linear space; native fields are interior node values."""

    kind = "fem"

    def __init__(self, mesh: fem.Mesh1D, ops: fem.FemOperators | None = None):
        self.mesh = mesh
        if ops is None:
            ops = fem.decompose(fem.assemble(mesh))
        ops.require_eig()
        self.ops = ops
        self._noise_matrices: dict[int, np.ndarray] = {}

    @property
    def dim(self) -> int:
        return self.mesh.n_interior

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.ops.eig_values

    @property
    def scale(self) -> float:
        return self.mesh.h

    def to_modal(self, field):
        return self.ops.eig_vectors.T @ (self.ops.mass @ np.asarray(field, float))

    def from_modal(self, modal):
        return self.ops.eig_vectors @ np.asarray(modal, float)

    def to_quadrature(self, modal):
        return fem.values_at_quadrature(self.from_modal(modal), self.mesh)

    def project_quadrature(self, values):
        # modal coefficients of the L2 projection: Psi^T b needs no mass solve
        return self.ops.eig_vectors.T @ fem.load_from_quadrature(values, self.mesh)

    def _noise_matrix(self, j_noise: int) -> np.ndarray:
        mat = self._noise_matrices.get(j_noise)
        if mat is None:
            if j_noise == 0:
                mat = np.zeros((self.dim, 0))
            else:
                loads = fem.sine_load_vector(np.arange(1, j_noise + 1), self.mesh)
                mat = self.ops.eig_vectors.T @ loads
            mat.flags.writeable = False
            self._noise_matrices[j_noise] = mat
        return mat

    def project_mode_increment(self, row):
        row = np.asarray(row, dtype=float)
        return self._noise_matrix(row.shape[0]) @ row

    def noise_trace(self, model) -> float:
        if model.j_noise == 0:
            return 0.0
        mat = self._noise_matrix(model.j_noise)
        return float(np.sum(model.q * np.sum(mat**2, axis=0)))

    def norm(self, field, order: int):
        return fem.fem_norm(field, order, self.ops)

    def modal_norm(self, modal, order: int):
        modal = np.asarray(modal, dtype=float)
        w = self.eigenvalues ** order
        sq = w * modal**2 if modal.ndim == 1 else w[:, None] * modal**2
        out = np.sqrt(np.sum(sq, axis=0))
        return float(out) if modal.ndim == 1 else out

    def integrate_drift_potential(self, field, drift):
        return fem.integrate_drift_potential(field, drift, self.mesh)

    def potential_from_modal(self, modal, drift):
        return fem.integrate_drift_potential(self.from_modal(modal), drift, self.mesh)


class Embedding:
    """Exact inclusion of a coarse space into a nested fine space.

    Coarse and fine spaces of the same family are nested here (leading
    sine modes; dyadically refined meshes), so a coarse field can be
    represented in the fine space without error: spectral coefficients
    are zero-padded and coarse hat combinations are interpolated at the
    fine nodes.  Cross-resolution errors are then measured in the fine
    space, which is the norm of the convergence statements: it keeps the
    part of the reference the coarse space cannot represent.
    """

    def __init__(self, coarse, fine):
        if fine.kind != coarse.kind:
            raise ValueError("cannot embed between different backend kinds")
        self.fine = fine
        self.coarse = coarse
        if fine.kind == "spectral":
            if coarse.dim > fine.dim:
                raise ValueError(
                    "dimension reconciliation failure: coarse space has more "
                    f"modes ({coarse.dim}) than the fine space ({fine.dim})"
                )
            self._w = None
        else:
            nf, nc = fine.dim, coarse.dim
            if (nf + 1) % (nc + 1) != 0 or nc > nf:
                raise ValueError(
                    "dimension reconciliation failure: meshes are not nested "
                    f"({nc} interior nodes vs {nf})"
                )
            ratio = (nf + 1) // (nc + 1)
            i = np.arange(1, nf + 1)[:, None]
            cap_i = np.arange(1, nc + 1)[None, :]
            w = np.maximum(0.0, 1.0 - np.abs(i / ratio - cap_i))
            w.flags.writeable = False
            self._w = w

    def __call__(self, field):
        field = np.asarray(field, dtype=float)
        if field.shape[0] != self.coarse.dim:
            raise ValueError(
                f"expected a coarse-space field of dimension {self.coarse.dim}"
            )
        if self.fine.kind == "spectral":
            out = np.zeros((self.fine.dim,) + field.shape[1:])
            out[: self.coarse.dim] = field
            return out
        return self._w @ field


def make_backend(kind: str, resolution: int):
    """Backend factory: mode count (spectral) or interior nodes (fem)."""
    if kind == "spectral":
        return SpectralBackend(resolution)
    if kind == "fem":
        return FemBackend(fem.Mesh1D(resolution))
    raise ValueError(f"unknown backend kind {kind!r}")
