"""Cubic drift, its potential and the averaged-vector-field gradient.

The drift is f(u) = a3 u^3 + a2 u^2 + a1 u + a0 with a3 > 0, so the
antiderivative F(u) = a3 u^4/4 + a2 u^3/3 + a1 u^2/2 + a0 u is bounded
below and the energy functional

    J(u, v) = 1/2 ||grad u||^2 + 1/2 ||v||^2 + int F(u) dx + C1

is a Lyapunov function once C1 >= -min F.  The averaged vector field

    avf(a, b) = int_0^1 f(a + t (b - a)) dt

is stored as an exact expanded polynomial in (a, b); it is symmetric,
reduces to f on the diagonal and satisfies the discrete gradient
identity F(b) - F(a) = avf(a, b) (b - a), which is what makes the time
stepper preserve the energy law path by path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["CubicDrift", "potential_integral"]


@dataclass(frozen=True)
class CubicDrift:
    """Cubic polynomial drift with energy offset.

    The default (a3=1, rest zero) is the pure cubic f(u) = u^3 used by
    the reference experiments, for which F >= 0 and c1_offset = 0 is
    admissible.
    """

    a3: float = 1.0
    a2: float = 0.0
    a1: float = 0.0
    a0: float = 0.0
    c1_offset: float = 0.0

    def __post_init__(self):
        if not self.a3 > 0.0:
            raise ValueError(
                "leading coefficient a3 must be positive so the quartic "
                "potential is bounded below"
            )
        if self.c1_offset < self.potential_lower_bound():
            raise ValueError(
                "c1_offset must be at least -min F = "
                f"{self.potential_lower_bound()!r}"
            )

    def eval_f(self, u):
        """Drift value, Horner form."""
        return ((self.a3 * u + self.a2) * u + self.a1) * u + self.a0

    def eval_F(self, u):
        """Antiderivative of the drift with F(0) = 0."""
        return (
            ((self.a3 / 4.0 * u + self.a2 / 3.0) * u + self.a1 / 2.0) * u + self.a0
        ) * u

    def avf(self, a, b):
        """Averaged vector field between states a and b, in closed form.

        Exact value of the parameter integral of f along the segment;
        no divided difference appears, so there is no small-increment
        singularity.
        """
        return (
            self.a3 * (a * a * a + a * a * b + a * b * b + b * b * b) / 4.0
            + self.a2 * (a * a + a * b + b * b) / 3.0
            + self.a1 * (a + b) / 2.0
            + self.a0
        )

    def avf_field(self, a_values, b_values):
        """Pointwise averaged vector field on matching grids."""
        a_values = np.asarray(a_values, dtype=float)
        b_values = np.asarray(b_values, dtype=float)
        if a_values.shape != b_values.shape:
            raise ValueError(
                f"grid shapes differ: {a_values.shape} vs {b_values.shape}"
            )
        return self.avf(a_values, b_values)

    def one_sided_constant(self) -> float:
        """Smallest c >= 0 with -(f(u)-f(v))(u-v) <= c (u-v)^2.

        Equals max(0, -min f') with min f' = a1 - a2^2/(3 a3).
        """
        return max(0.0, self.a2**2 / (3.0 * self.a3) - self.a1)

    def potential_lower_bound(self) -> float:
        """-min_u F(u), the constant b1 with int F >= -b1 on (0, 1)."""
        # stationary points of F are the real roots of f
        roots = np.roots([self.a3, self.a2, self.a1, self.a0])
        real = roots.real[np.abs(roots.imag) < 1e-12 * (1.0 + np.abs(roots.real))]
        candidates = np.concatenate([real, [0.0]])
        return max(0.0, -float(np.min(self.eval_F(candidates))))


def potential_integral(u, drift: CubicDrift, backend):
    """Integral of F over the domain for a field of the given backend.

    Dispatches to the backend quadrature, which is exact for fields of
    its discrete space (dealiased node sums and closed-form sine
    integrals for the spectral basis, per-element Gauss rules for the
    finite element basis).
    """
    return backend.integrate_drift_potential(u, drift)
