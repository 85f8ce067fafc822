"""Principal component pursuit instances at desk scale.

Builds synthetic low-rank + sparse + noise matrices and the matching
two-term split problem: after eliminating the sparse component in
closed form, the data-fit plus entrywise penalty collapses to a Moreau
envelope (smooth, 1-Lipschitz gradient), leaving the nuclear-norm
penalty and the nonnegativity constraint as the simple terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .gfb import GfbConfig, SplitProblem
from .operators import (
    SmoothOracle,
    moreau_env_value_grad,
    nonneg_prox_oracle,
    nuclear_prox_oracle,
    prox_scaled_l1,
    svd,
)
from .space import Weights

__all__ = [
    "PcpParams",
    "PcpInstance",
    "synth_instance",
    "resolve_mus",
    "build_problem",
    "recover_sparse",
    "evaluate_objective",
]

#: Entries of the low-rank iterate may dip this far below zero before the
#: nonnegativity indicator evaluates to infinity.
NONNEG_TOL = 1e-12


@dataclass(frozen=True)
class PcpParams:
    """Synthetic instance description.

    ``mu1``/``mu2`` default to ``0.1*max|M|`` and ``0.5*sigma_1(M)``
    when left unset.  All randomness comes from a PCG64 generator seeded
    with ``seed``.
    """

    rows: int
    cols: int
    rank: int = 2
    sparse_frac: float = 0.05
    sparse_lo: float = 0.5
    sparse_hi: float = 1.0
    noise_std: float = 0.01
    mu1: Optional[float] = None
    mu2: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("need at least one row and one column")
        if not 0 <= self.rank <= min(self.rows, self.cols):
            raise ValueError(
                f"rank must lie in [0, {min(self.rows, self.cols)}], got {self.rank}"
            )
        if not 0.0 <= self.sparse_frac <= 1.0:
            raise ValueError("sparse_frac must lie in [0, 1]")
        if not 0.0 <= self.sparse_lo <= self.sparse_hi:
            raise ValueError("need 0 <= sparse_lo <= sparse_hi")
        if self.noise_std < 0.0:
            raise ValueError("noise_std must be nonnegative")
        for name in ("mu1", "mu2"):
            val = getattr(self, name)
            if val is not None and not val > 0.0:
                raise ValueError(f"{name} must be positive when given")


@dataclass(frozen=True)
class PcpInstance:
    """Observed matrix and the ground-truth decomposition it was built from."""

    M: np.ndarray
    XL0: np.ndarray
    XS0: np.ndarray
    N: np.ndarray


def synth_instance(params: PcpParams) -> PcpInstance:
    """Draw a synthetic low-rank + sparse + noise instance.

    The low-rank factors are clamped entrywise at zero before taking
    their product (keeping the rank bound while matching the
    nonnegativity constraint) and the product is rescaled to unit
    spectral norm.  Sparse entries get uniform magnitudes in the
    configured range with random signs at uniformly drawn positions.
    Identical parameters (including the seed) reproduce the instance
    bit for bit; draw order is factors, positions, magnitudes, signs,
    noise.
    """
    rng = np.random.default_rng(np.random.PCG64(params.seed))
    rows, cols, r = params.rows, params.cols, params.rank

    g1 = np.maximum(rng.standard_normal((rows, r)), 0.0)
    g2 = np.maximum(rng.standard_normal((cols, r)), 0.0)
    low = g1 @ g2.T if r > 0 else np.zeros((rows, cols))
    if r > 0:
        top = svd(low)[1][0]
        if top > 0.0:
            low = low / top

    count = round(params.sparse_frac * rows * cols)
    sparse = np.zeros(rows * cols)
    if count > 0:
        positions = rng.choice(rows * cols, size=count, replace=False)
        magnitudes = rng.uniform(params.sparse_lo, params.sparse_hi, size=count)
        signs = rng.choice(np.array([-1.0, 1.0]), size=count)
        sparse[positions] = signs * magnitudes
    sparse = sparse.reshape(rows, cols)

    noise = params.noise_std * rng.standard_normal((rows, cols))
    return PcpInstance(M=low + sparse + noise, XL0=low, XS0=sparse, N=noise)


def resolve_mus(instance: PcpInstance, params: PcpParams) -> tuple[float, float]:
    """Regularization weights, applying the data-driven defaults."""
    mu1 = params.mu1
    if mu1 is None:
        mu1 = 0.1 * float(np.max(np.abs(instance.M)))
        if mu1 <= 0.0:
            raise ValueError("cannot infer mu1 from an all-zero matrix")
    mu2 = params.mu2
    if mu2 is None:
        mu2 = 0.5 * float(svd(instance.M)[1][0])
        if mu2 <= 0.0:
            raise ValueError("cannot infer mu2 from an all-zero matrix")
    return mu1, mu2


def build_problem(instance: PcpInstance, params: PcpParams):
    """Split problem and default solver configuration for an instance.

    The smooth term is the Moreau envelope of the entrywise penalty
    evaluated at ``M - X`` (gradient cocoercivity constant one); the
    simple terms are the nuclear-norm penalty and the nonnegativity
    indicator with equal weights.
    """
    mu1, mu2 = resolve_mus(instance, params)
    M = instance.M

    def env_value(x):
        value, _ = moreau_env_value_grad(M - x, mu1)
        return value

    def env_grad(x):
        _, grad = moreau_env_value_grad(M - x, mu1)
        return -grad

    nuclear = nuclear_prox_oracle(mu2)
    nonneg = nonneg_prox_oracle(NONNEG_TOL)

    def objective(x):
        if float(np.min(x)) < -NONNEG_TOL:
            return math.inf
        return env_value(x) + nuclear.value(x)

    problem = SplitProblem(
        smooth=SmoothOracle(gradient=env_grad, beta=1.0, value=env_value),
        simple_terms=(nuclear, nonneg),
        objective=objective,
    )
    config = GfbConfig(
        gamma=1.0,
        weights=Weights.uniform(2),
        relaxation=1.0,
        mode="pointwise",
        max_iters=2000,
        block_shape=M.shape,
    )
    return problem, config


def recover_sparse(x_low: np.ndarray, M: np.ndarray, mu1: float) -> np.ndarray:
    """Closed-form sparse component for a fixed low-rank component."""
    x_low = np.asarray(x_low, dtype=np.float64)
    M = np.asarray(M, dtype=np.float64)
    if x_low.shape != M.shape:
        raise ValueError(f"shape mismatch: {x_low.shape} vs {M.shape}")
    return prox_scaled_l1(M - x_low, mu1)


def evaluate_objective(x_low: np.ndarray, x_sparse: np.ndarray,
                       instance: PcpInstance, params: PcpParams) -> float:
    """Full two-component objective value (infinite outside the orthant)."""
    x_low = np.asarray(x_low, dtype=np.float64)
    x_sparse = np.asarray(x_sparse, dtype=np.float64)
    if x_low.shape != instance.M.shape or x_sparse.shape != instance.M.shape:
        raise ValueError("component shapes must match the observed matrix")
    if float(np.min(x_low)) < -NONNEG_TOL:
        return math.inf
    mu1, mu2 = resolve_mus(instance, params)
    resid = instance.M - x_low - x_sparse
    return (
        0.5 * float(np.sum(resid * resid))
        + mu1 * float(np.sum(np.abs(x_sparse)))
        + mu2 * float(np.sum(svd(x_low)[1]))
    )
