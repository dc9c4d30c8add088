"""Q-Wiener increments in the Laplacian sine eigenbasis.

The covariance is diagonal with weights q_j = lambda_j^(-s),
lambda_j = (j pi)^2, truncated to j_noise modes.  An increment table
for one sample path is an (n_steps, j_noise) array whose (n, j) entry
is sqrt(q_j) xi with xi ~ N(0, tau), i.i.d. across entries.

Streams are counter based so that Monte Carlo workers can draw samples
in any order and still agree bit for bit within one build: sample k
uses a Philox generator keyed by the master seed with the high counter
word set to k, and table entry (n, j) is the (n * j_noise + j)-th
standard normal of that stream.  Coarser resolutions never redraw;
they reuse the same table through block sums in time and leading-column
truncation in modes, which is what makes strong errors measure the
discretization and not the noise.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "NoiseModel",
    "SeedPlan",
    "sample_increments",
    "coarsen_time",
    "restrict_modes",
    "hs_norm_check",
]


@dataclass(frozen=True)
class NoiseModel:
    """Diagonal covariance q_j = lambda_j^(-s) on j_noise sine modes.

    gamma is the smoothness index the configuration claims for the
    noise; the truncated covariance supports it only when
    gamma < s + 1/2, which :meth:`validate` enforces and
    :func:`hs_norm_check` diagnoses.
    """

    s: float
    j_noise: int
    gamma: float = 1.0

    def __post_init__(self):
        if self.s < 0.0:
            raise ValueError("decay exponent s must be nonnegative")
        if self.j_noise < 0:
            raise ValueError("j_noise must be nonnegative")
        if self.gamma < 1.0:
            raise ValueError("noise smoothness index gamma must be >= 1")

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        j = np.arange(1, self.j_noise + 1)
        lam = (j * np.pi) ** 2
        lam.flags.writeable = False
        return lam

    @cached_property
    def q(self) -> np.ndarray:
        q = self.eigenvalues ** (-self.s)
        q.flags.writeable = False
        return q

    def validate(self):
        """Reject configurations whose claimed gamma the tail cannot carry."""
        if self.j_noise > 0 and not self.gamma < self.s + 0.5:
            raise ValueError(
                f"noise regularity violated: gamma={self.gamma} requires "
                f"gamma < s + 1/2 = {self.s + 0.5}"
            )


@dataclass(frozen=True)
class SeedPlan:
    """Deterministic per-sample stream derivation from one master seed."""

    master_seed: int = 42

    def generator(self, sample_index: int) -> np.random.Generator:
        if sample_index < 0:
            raise ValueError("sample_index must be nonnegative")
        bitgen = np.random.Philox(
            key=self.master_seed, counter=[0, 0, 0, sample_index]
        )
        return np.random.Generator(bitgen)

    @staticmethod
    def stream_position(step_index: int, mode_index: int, table_width: int) -> int:
        """Index of table entry (step, mode) in the sample's normal draw
        sequence; tables are filled row-major from position zero."""
        return step_index * table_width + mode_index


def sample_increments(
    model: NoiseModel, plan: SeedPlan, sample_id: int, n_steps: int, tau: float
) -> np.ndarray:
    """Increment table for one sample path, shape (n_steps, j_noise)."""
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    xi = plan.generator(sample_id).standard_normal((n_steps, model.j_noise))
    return xi * np.sqrt(tau * model.q)


def coarsen_time(table: np.ndarray, factor: int) -> np.ndarray:
    """Block sums of rows: the same Brownian path on a coarser grid.

    Even factors are reduced by repeated pairwise halving, so dyadic
    coarsenings nest bit-exactly: coarsen(coarsen(x, 2), 2) equals
    coarsen(x, 4) element by element, and the fully coarsened single
    row is the canonical per-mode path endpoint.
    """
    table = np.asarray(table)
    factor = int(factor)
    if factor < 1:
        raise ValueError("factor must be a positive integer")
    if table.shape[0] % factor != 0:
        raise ValueError(
            f"factor {factor} does not divide {table.shape[0]} steps"
        )
    if factor == 1:
        return table.copy()
    if factor % 2 == 0:
        return coarsen_time(table[0::2] + table[1::2], factor // 2)
    out = table[0::factor].copy()
    for k in range(1, factor):
        out += table[k::factor]
    return out


def restrict_modes(table: np.ndarray, j_keep: int) -> np.ndarray:
    """Leading-column truncation onto the first j_keep modes."""
    table = np.asarray(table)
    if not 0 <= j_keep <= table.shape[1]:
        raise ValueError(
            f"cannot keep {j_keep} of {table.shape[1]} noise modes"
        )
    return table[:, :j_keep].copy()


def hs_norm_check(model: NoiseModel) -> float:
    """Truncated sum of lambda_j^(gamma - 1 - s) behind the gamma claim.

    Returns the partial sum over the active modes and warns when the
    exponent says the untruncated series diverges.
    """
    if model.j_noise > 0 and not model.gamma < model.s + 0.5:
        warnings.warn(
            f"gamma={model.gamma} >= s + 1/2 = {model.s + 0.5}: the "
            "weighted covariance trace diverges as modes are added",
            stacklevel=2,
        )
    if model.j_noise == 0:
        return 0.0
    return float(np.sum(model.eigenvalues ** (model.gamma - 1.0 - model.s)))
