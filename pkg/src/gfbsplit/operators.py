"""Proximal and smooth building blocks for composite objectives.

Closed-form proximity operators (entrywise soft-thresholding, singular
value soft-thresholding, orthant projection), the SVD kernel they rely
on, Moreau-envelope smoothing, and a brute-force descent oracle used to
gate prox implementations against an independent minimization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ._jacobi import jacobi_svd

__all__ = [
    "DenseMatrix",
    "ProxOracle",
    "SmoothOracle",
    "OracleDivergence",
    "prox_scaled_l1",
    "svd",
    "nuclear_norm",
    "prox_nuclear",
    "project_nonneg",
    "moreau_env_value_grad",
    "check_prox_oracle",
    "l1_prox_oracle",
    "nuclear_prox_oracle",
    "nonneg_prox_oracle",
    "box_prox_oracle",
]

#: Dense real matrix, row-major; alias kept for signatures.
DenseMatrix = np.ndarray


class OracleDivergence(RuntimeError):
    """The descent oracle produced a non-finite trajectory."""

    def __init__(self, sample_index: int, message: str):
        super().__init__(f"sample {sample_index}: {message}")
        self.sample_index = sample_index


@dataclass(frozen=True)
class ProxOracle:
    """Proximity operator of a simple convex function ``h``.

    ``fn(point, scale)`` must return ``argmin_x 0.5*||x - point||^2 +
    scale*h(x)``; it is firmly nonexpansive in ``point`` for every fixed
    positive ``scale``.  ``value`` optionally evaluates ``h`` itself so
    composite objectives can be assembled.
    """

    fn: Callable[[np.ndarray, float], np.ndarray]
    label: str
    value: Optional[Callable[[np.ndarray], float]] = None

    def evaluate(self, point: np.ndarray, scale: float) -> np.ndarray:
        if not (scale > 0.0):
            raise ValueError(f"prox scale must be positive, got {scale!r}")
        return np.asarray(self.fn(point, float(scale)), dtype=np.float64)


@dataclass(frozen=True)
class SmoothOracle:
    """Gradient oracle of the smooth term.

    ``beta`` is the cocoercivity constant of the gradient: for convex
    functions this is the reciprocal of the gradient's Lipschitz
    constant.
    """

    gradient: Callable[[np.ndarray], np.ndarray]
    beta: float
    value: Optional[Callable[[np.ndarray], float]] = None

    def __post_init__(self):
        if not (self.beta > 0.0):
            raise ValueError(f"cocoercivity constant must be positive, got {self.beta!r}")


def prox_scaled_l1(v: np.ndarray, theta: float) -> np.ndarray:
    """Entrywise soft-thresholding, the prox of ``theta * ||.||_1``."""
    if not (theta > 0.0):
        raise ValueError(f"threshold must be positive, got {theta!r}")
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - theta, 0.0)


def svd(mat: DenseMatrix):
    """Thin SVD ``(u, s, v)`` with ``mat = u @ diag(s) @ v.T``.

    One-sided Jacobi iteration; singular values are returned in
    descending order and the factors are column-orthonormal, with a
    deterministic sign convention (first nonzero entry of each left
    singular vector nonnegative).
    """
    return jacobi_svd(mat)


def nuclear_norm(mat: DenseMatrix) -> float:
    """Sum of singular values."""
    return float(np.sum(svd(mat)[1]))


def prox_nuclear(mat: DenseMatrix, theta: float) -> DenseMatrix:
    """Singular value soft-thresholding, the prox of ``theta * ||.||_*``."""
    if not (theta > 0.0):
        raise ValueError(f"threshold must be positive, got {theta!r}")
    u, s, v = svd(mat)
    shrunk = np.maximum(s - theta, 0.0)
    return (u * shrunk) @ v.T


def project_nonneg(mat: np.ndarray) -> np.ndarray:
    """Projection onto the nonnegative orthant (scale-free prox)."""
    return np.maximum(np.asarray(mat, dtype=np.float64), 0.0)


def moreau_env_value_grad(v: np.ndarray, mu: float):
    """Value and gradient of the Moreau envelope of ``mu * ||.||_1``.

    The envelope (of index one) is ``min_z 0.5*||v - z||^2 + mu*||z||_1``;
    its gradient ``v - prox(v)`` is 1-Lipschitz.
    """
    if not (mu > 0.0):
        raise ValueError(f"envelope index must be positive, got {mu!r}")
    v = np.asarray(v, dtype=np.float64)
    p = prox_scaled_l1(v, mu)
    grad = v - p
    value = 0.5 * float(np.sum(grad * grad)) + mu * float(np.sum(np.abs(p)))
    return value, grad


def l1_prox_oracle(weight: float = 1.0) -> ProxOracle:
    """Oracle for ``h = weight * ||.||_1``."""
    if not (weight > 0.0):
        raise ValueError("weight must be positive")
    return ProxOracle(
        fn=lambda v, scale: prox_scaled_l1(v, scale * weight),
        label=f"{weight:g}*l1",
        value=lambda v: weight * float(np.sum(np.abs(v))),
    )


def nuclear_prox_oracle(weight: float = 1.0) -> ProxOracle:
    """Oracle for ``h = weight * ||.||_*`` on matrix blocks."""
    if not (weight > 0.0):
        raise ValueError("weight must be positive")
    return ProxOracle(
        fn=lambda v, scale: prox_nuclear(v, scale * weight),
        label=f"{weight:g}*nuclear",
        value=lambda v: weight * nuclear_norm(v),
    )


def nonneg_prox_oracle(tol: float = 1e-12) -> ProxOracle:
    """Oracle for the indicator of the nonnegative orthant."""

    def _value(v):
        return 0.0 if float(np.min(v)) >= -tol else math.inf

    return ProxOracle(
        fn=lambda v, scale: project_nonneg(v),
        label="nonneg",
        value=_value,
    )


def box_prox_oracle(lo: float, hi: float, tol: float = 1e-12) -> ProxOracle:
    """Oracle for the indicator of the box ``[lo, hi]``."""
    if not lo <= hi:
        raise ValueError("need lo <= hi")

    def _value(v):
        inside = float(np.min(v)) >= lo - tol and float(np.max(v)) <= hi + tol
        return 0.0 if inside else math.inf

    return ProxOracle(
        fn=lambda v, scale: np.clip(v, lo, hi),
        label=f"box[{lo:g},{hi:g}]",
        value=_value,
    )


def _descent_scalar(v, theta, h_value, subgrad, project, iters):
    # Scalar fast path: pure-float loop, same schedule as the array path.
    x = v if project is None else float(project(v))
    best = x
    fbest = 0.5 * (x - v) ** 2 + theta * float(h_value(x))
    c = abs(v) + 1.0
    for t in range(1, iters + 1):
        g = x - v
        if subgrad is not None:
            g += theta * float(subgrad(x))
        x -= (c / math.sqrt(t)) * g
        if project is not None:
            x = float(project(x))
        f = 0.5 * (x - v) ** 2 + theta * float(h_value(x))
        if f < fbest:
            fbest = f
            best = x
    return best, fbest


def _descent_array(v, theta, h_value, subgrad, project, iters):
    x = v.copy() if project is None else np.asarray(project(v.copy()), dtype=np.float64)
    best = x.copy()

    def objective(pt):
        d = pt - v
        return 0.5 * float(np.sum(d * d)) + theta * float(h_value(pt))

    fbest = objective(x)
    c = float(np.linalg.norm(v)) + 1.0
    for t in range(1, iters + 1):
        g = x - v
        if subgrad is not None:
            g = g + theta * np.asarray(subgrad(x), dtype=np.float64)
        x = x - (c / math.sqrt(t)) * g
        if project is not None:
            x = np.asarray(project(x), dtype=np.float64)
        f = objective(x)
        if f < fbest:
            fbest = f
            best = x.copy()
    return best, fbest


def check_prox_oracle(
    prox: ProxOracle,
    h_value: Callable[[np.ndarray], float],
    samples: int,
    theta: float,
    *,
    subgrad: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    project: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    iters: int = 100_000,
    sample_shape=(1,),
    sample_scale: float = 2.0,
    seed: int = 0,
) -> float:
    """Gate a prox implementation against an independent minimization.

    For each random sample ``v`` the strongly convex problem
    ``min_x 0.5*||x - v||^2 + theta*h(x)`` is solved by projected
    (sub)gradient descent with diminishing steps ``c/sqrt(t)``,
    ``c = ||v|| + 1``, keeping the best iterate by objective value.
    ``subgrad`` supplies a subgradient selection of ``h``; ``project``
    is used instead when ``h`` is an indicator.  Returns the maximum
    distance between the descent minimizer and ``prox(v, theta)`` over
    all samples.
    """
    if not (theta > 0.0):
        raise ValueError("theta must be positive")
    if subgrad is None and project is None:
        raise ValueError("need a subgradient selection or a projection for h")
    rng = np.random.default_rng(seed)
    scalar = int(np.prod(sample_shape)) == 1
    worst = 0.0
    for idx in range(samples):
        v = sample_scale * rng.standard_normal(sample_shape)
        ref = prox.evaluate(v, theta)
        if scalar:
            best, fbest = _descent_scalar(
                float(v.reshape(-1)[0]), theta, h_value, subgrad, project, iters
            )
            err = float(np.max(np.abs(ref - best)))
        else:
            best, fbest = _descent_array(v, theta, h_value, subgrad, project, iters)
            err = float(np.linalg.norm((ref - best).reshape(-1)))
        if not math.isfinite(fbest):
            raise OracleDivergence(idx, "descent objective became non-finite")
        worst = max(worst, err)
    return worst
