"""Sine spectral basis for the Dirichlet Laplacian on (0, 1).

The basis functions are e_j(x) = sqrt(2) sin(j pi x) with eigenvalues
lambda_j = (j pi)^2, j = 1..J.  A field is represented by its vector of
J sine coefficients; Parseval makes the coefficient 2-norm equal to the
L2 norm.  Collocation uses M = 3J interior nodes x_m = m/(M+1), which is
enough to project a cubic of a J-mode field without aliasing: the cubic
excites modes up to 3J, and the discrete sine transform on M nodes is an
exact L2 projection for sine polynomials of degree <= M.

All arrays accept a trailing batch axis, i.e. coefficients of shape (J,)
or (J, B) and grid values of shape (M,) or (M, B).
"""

from __future__ import annotations

import numpy as np

__all__ = ["SpectralBasis"]


class SpectralBasis:
    """Sine eigenbasis with exact dealiased transforms for cubic terms.

    Attributes
    ----------
    n_modes : int
        Number of retained modes J.
    eigenvalues : ndarray, shape (J,)
        lambda_j = (j pi)^2, strictly increasing.
    n_nodes : int
        Number of collocation nodes, M = 3J.
    nodes : ndarray, shape (M,)
        Interior nodes x_m = m / (M + 1).
    """

    def __init__(self, n_modes: int):
        if n_modes < 1:
            raise ValueError("n_modes must be a positive integer")
        self.n_modes = int(n_modes)
        j = np.arange(1, self.n_modes + 1)
        self.eigenvalues = (j * np.pi) ** 2
        self.n_nodes = 3 * self.n_modes
        m = np.arange(1, self.n_nodes + 1)
        self.nodes = m / (self.n_nodes + 1)
        # synthesis matrix T[m, j] = sqrt(2) sin(j pi x_m); analysis is
        # T^T / (M+1) by discrete sine orthogonality
        self._synth = np.sqrt(2.0) * np.sin(np.outer(self.nodes, j) * np.pi)
        for a in (self.eigenvalues, self.nodes, self._synth):
            a.flags.writeable = False
        self._synth_full = None  # M-mode transform, built on demand

    @property
    def mesh_parameter(self) -> float:
        """Resolution measure lambda_{J+1}^{-1/2} = 1/((J+1) pi)."""
        return 1.0 / ((self.n_modes + 1) * np.pi)

    def _check_coeffs(self, coeffs: np.ndarray) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[0] != self.n_modes:
            raise ValueError(
                f"expected {self.n_modes} coefficients, got {coeffs.shape[0]}"
            )
        return coeffs

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        """Evaluate the field at the collocation nodes."""
        return self._synth @ self._check_coeffs(coeffs)

    def analyze(self, values: np.ndarray) -> np.ndarray:
        """First J sine coefficients of grid values.

        Realizes the L2-orthogonal projection onto the basis: exact (up
        to rounding) whenever the grid samples a sine polynomial of
        degree <= M, hence an exact inverse of :meth:`synthesize`.
        """
        values = np.asarray(values, dtype=float)
        if values.shape[0] != self.n_nodes:
            raise ValueError(
                f"expected {self.n_nodes} grid values, got {values.shape[0]}"
            )
        return self._synth.T @ values / (self.n_nodes + 1)

    def _analyze_all_modes(self, values: np.ndarray) -> np.ndarray:
        """All M sine coefficients of grid values (exact for degree <= M)."""
        if self._synth_full is None:
            k = np.arange(1, self.n_nodes + 1)
            full = np.sqrt(2.0) * np.sin(np.outer(self.nodes, k) * np.pi)
            full.flags.writeable = False
            self._synth_full = full
        return self._synth_full.T @ values / (self.n_nodes + 1)

    def apply_spectral_function(self, coeffs: np.ndarray, fn) -> np.ndarray:
        """Diagonal action c_j -> fn(lambda_j) c_j.

        Realizes any function of the discrete Laplacian, e.g. the wave
        phase operators cos(t sqrt(lambda)) and sin(t sqrt(lambda)).
        """
        coeffs = self._check_coeffs(coeffs)
        weights = np.broadcast_to(
            np.asarray(fn(self.eigenvalues), dtype=float), (self.n_modes,)
        )
        if not np.all(np.isfinite(weights)):
            raise ValueError("spectral function produced non-finite values")
        if coeffs.ndim == 1:
            return weights * coeffs
        return weights[:, None] * coeffs

    def sobolev_norm(self, coeffs: np.ndarray, order: float) -> float | np.ndarray:
        """Fractional Sobolev norm (sum_j lambda_j^order c_j^2)^(1/2).

        order=0 is the L2 norm, order=1 the H1_0 (gradient) norm and
        order=-1 the negative norm used for velocity errors.
        """
        coeffs = self._check_coeffs(coeffs)
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("field has non-finite entries")
        w = self.eigenvalues**order
        if coeffs.ndim == 1:
            return float(np.sqrt(np.sum(w * coeffs**2)))
        return np.sqrt(np.sum(w[:, None] * coeffs**2, axis=0))

    def integrate_drift_potential(self, coeffs: np.ndarray, drift):
        """Exact integral of drift.eval_F over (0, 1) for a basis field.

        Term-by-term: the quartic and quadratic parts use the interior
        node sum and Parseval (both exact for band-limited fields with
        zero boundary values); the odd-power parts use closed-form sine
        integrals of the full-mode coefficient expansion.
        """
        coeffs = self._check_coeffs(coeffs)
        batched = coeffs.ndim == 2
        total = 0.0 if not batched else np.zeros(coeffs.shape[1])
        grid = None
        if drift.a3 != 0.0:
            grid = self.synthesize(coeffs)
            total = total + (drift.a3 / 4.0) * np.sum(grid**4, axis=0) / (
                self.n_nodes + 1
            )
        if drift.a2 != 0.0:
            if grid is None:
                grid = self.synthesize(coeffs)
            cubed = self._analyze_all_modes(grid**3)
            k = np.arange(1, self.n_nodes + 1)
            sine_integrals = np.sqrt(2.0) * (1.0 - (-1.0) ** k) / (k * np.pi)
            w = sine_integrals if not batched else sine_integrals[:, None]
            total = total + (drift.a2 / 3.0) * np.sum(w * cubed, axis=0)
        if drift.a1 != 0.0:
            total = total + (drift.a1 / 2.0) * np.sum(coeffs**2, axis=0)
        if drift.a0 != 0.0:
            j = np.arange(1, self.n_modes + 1)
            sine_integrals = np.sqrt(2.0) * (1.0 - (-1.0) ** j) / (j * np.pi)
            w = sine_integrals if not batched else sine_integrals[:, None]
            total = total + drift.a0 * np.sum(w * coeffs, axis=0)
        return float(total) if not batched else total
