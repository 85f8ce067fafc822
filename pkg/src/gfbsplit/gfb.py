"""Inexact, relaxed generalized forward-backward iteration.

One sweep applies the gradient of the smooth term at the weighted
average ``x = sum_i w_i z_i``, evaluates every simple term's prox at
``2x - z_i - gamma*grad`` (optionally perturbed by injected errors),
and relaxes the blocks toward the prox outputs.  The sweep is a relaxed
fixed-point step ``z + lam*(T z - z)`` of an averaged map ``T`` whose
fixed points encode the minimizers, so the fixed-point defect
``e = z - T z`` doubles as the termination residual.  Alongside the
iterates the sweep produces an explicit first-order certificate built
from the exact prox outputs, plus running ergodic averages of iterates,
residuals and certificates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .operators import ProxOracle, SmoothOracle
from .space import (
    Block,
    ProductPoint,
    Weights,
    lift,
    weighted_block_sum,
    weighted_norm,
)

__all__ = [
    "SplitProblem",
    "ErrorSchedule",
    "GfbConfig",
    "ValidatedConfig",
    "ConfigError",
    "NumericalFailure",
    "SolverState",
    "IterationTrace",
    "validate_config",
    "initial_state",
    "gfb_iterate",
    "apply_T",
    "residual_e",
    "certificate_g",
    "ergodic_read",
    "run",
]

#: Agreement tolerance between the two residual formulas (definition vs
#: update difference); a breach is treated as numerical failure.
RESIDUAL_XCHECK_TOL = 1e-10


class ConfigError(ValueError):
    """Invalid solver configuration; ``violations`` lists every breach."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class NumericalFailure(RuntimeError):
    """Non-finite values or broken invariants mid-run.

    Carries the iteration index and the last consistent state.
    """

    def __init__(self, iteration: int, message: str, state: "SolverState | None" = None):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration
        self.state = state


@dataclass(frozen=True)
class SplitProblem:
    """A smooth gradient oracle plus ``n`` simple prox oracles.

    ``objective``, when provided, evaluates the full composite objective
    at a block (used only for trace observability).
    """

    smooth: SmoothOracle
    simple_terms: tuple[ProxOracle, ...]
    objective: Optional[Callable[[Block], float]] = None

    def __post_init__(self):
        object.__setattr__(self, "simple_terms", tuple(self.simple_terms))
        if len(self.simple_terms) < 1:
            raise ValueError("need at least one simple term")

    @property
    def n(self) -> int:
        return len(self.simple_terms)


@dataclass(frozen=True)
class ErrorSchedule:
    """Deterministic injection of prox evaluation errors.

    ``norm_at(k)`` gives the target product-space norm at iteration
    ``k``; directions are drawn from a seeded PCG64 generator.  The
    ``pre`` target perturbs the prox argument (per block, or one shared
    block when ``shared_pre``), the ``post`` target adds to the prox
    output.  ``both`` splits the target norm evenly.
    """

    kind: str = "none"  # none | power_decay | custom
    amplitude: float = 0.0
    exponent: float = 3.0
    seed: int = 0
    target: str = "post"  # post | pre | both
    shared_pre: bool = False
    custom_norms: Optional[Callable[[int], float]] = None

    @classmethod
    def none(cls) -> "ErrorSchedule":
        return cls()

    @classmethod
    def power_decay(cls, amplitude: float, exponent: float, *, seed: int = 0,
                    target: str = "post", shared_pre: bool = False) -> "ErrorSchedule":
        return cls(kind="power_decay", amplitude=amplitude, exponent=exponent,
                   seed=seed, target=target, shared_pre=shared_pre)

    def norm_at(self, k: int) -> float:
        if self.kind == "none":
            return 0.0
        if self.kind == "power_decay":
            return self.amplitude * (k + 1) ** (-self.exponent)
        if self.kind == "custom":
            if self.custom_norms is None:
                raise ValueError("custom error schedule needs custom_norms")
            return float(self.custom_norms(k))
        raise ValueError(f"unknown error schedule kind {self.kind!r}")


@dataclass
class GfbConfig:
    """Solver configuration.

    ``relaxation`` may be a constant, a sequence (extended by its last
    value), or a callable of the iteration index.  ``mode`` declares the
    relaxation regime the rate certificates assume: ``pointwise``
    (non-decreasing schedule in ``[1/(2*alpha), 1/alpha[``) or
    ``ergodic`` (schedule in ``]0, 1[``).  ``stop_tol`` thresholds the
    squared stopping quantity; ``None`` or ``inf`` disables early
    stopping so exactly ``max_iters`` sweeps run.
    """

    gamma: float
    weights: Weights
    relaxation: float | Sequence[float] | Callable[[int], float] = 1.0
    errors: ErrorSchedule = field(default_factory=ErrorSchedule)
    max_iters: int = 1000
    stop_tol: Optional[float] = None
    stop_criterion: str = "certificate"  # certificate | residual
    mode: str = "pointwise"  # pointwise | ergodic
    z0: Optional[ProductPoint] = None
    block_shape: Optional[tuple] = None
    retain_history: bool = False


@dataclass(frozen=True)
class ValidatedConfig:
    """Outcome of :func:`validate_config`: resolved schedule and constants."""

    gamma: float
    beta: float
    alpha: float
    weights: Weights
    lam: np.ndarray
    mode: str
    errors: ErrorSchedule
    max_iters: int
    stop_tol: Optional[float]
    stop_criterion: str
    z0: ProductPoint
    retain_history: bool

    @property
    def n(self) -> int:
        return self.weights.n


def _materialize_relaxation(relaxation, horizon: int) -> np.ndarray:
    if callable(relaxation):
        lam = np.array([float(relaxation(k)) for k in range(horizon)])
    elif np.isscalar(relaxation):
        lam = np.full(horizon, float(relaxation))
    else:
        seq = np.asarray(relaxation, dtype=np.float64).reshape(-1)
        if seq.size == 0:
            raise ConfigError(["relaxation sequence is empty"])
        if seq.size >= horizon:
            lam = seq[:horizon].copy()
        else:
            lam = np.concatenate([seq, np.full(horizon - seq.size, seq[-1])])
    if not np.all(np.isfinite(lam)):
        raise ConfigError(["relaxation schedule contains non-finite values"])
    return lam


def validate_config(problem: SplitProblem, config: GfbConfig) -> ValidatedConfig:
    """Check a configuration against the admissibility and rate hypotheses.

    Every violated condition is reported (with the hypothesis it
    breaks) in a single :class:`ConfigError`.  On success returns the
    resolved schedule together with the averagedness constant
    ``alpha = 2*beta/(4*beta - gamma)``.
    """
    violations = []
    beta = problem.smooth.beta
    gamma = float(config.gamma)
    if not (0.0 < gamma < 2.0 * beta):
        violations.append(
            f"gamma={gamma!r} outside ]0, {2.0 * beta!r}[ "
            "(admissible-step condition for the averaged splitting map)"
        )
        alpha = None
    else:
        alpha = 2.0 * beta / (4.0 * beta - gamma)

    if config.weights.n != problem.n:
        violations.append(
            f"problem has {problem.n} simple terms but {config.weights.n} weights"
        )

    if config.max_iters < 1:
        violations.append("max_iters must be at least 1")
    horizon = max(int(config.max_iters), 1)
    try:
        lam = _materialize_relaxation(config.relaxation, horizon)
    except ConfigError as exc:
        violations.extend(exc.violations)
        lam = np.full(horizon, 1.0)

    if alpha is not None:
        inv_alpha = 1.0 / alpha
        if np.any(lam <= 0.0) or np.any(lam >= inv_alpha):
            violations.append(
                f"relaxation must stay in ]0, 1/alpha[ = ]0, {inv_alpha!r}[ "
                "(admissibility of the relaxed fixed-point step)"
            )
        if config.mode == "pointwise":
            if np.any(lam < 0.5 * inv_alpha - 1e-15):
                violations.append(
                    f"pointwise-rate hypothesis requires relaxation >= 1/(2*alpha) "
                    f"= {0.5 * inv_alpha!r}"
                )
            if np.any(np.diff(lam) < -1e-15):
                violations.append(
                    "pointwise-rate hypothesis requires a non-decreasing relaxation schedule"
                )
            tau = lam * (inv_alpha - lam)
            if np.any(np.diff(tau) > 1e-12):
                violations.append(
                    "relaxation schedule must keep lam*(1/alpha - lam) non-increasing "
                    "(pointwise-rate hypothesis)"
                )
        elif config.mode == "ergodic":
            if np.any(lam <= 0.0) or np.any(lam >= 1.0):
                violations.append(
                    "ergodic-rate hypothesis requires relaxation in ]0, 1["
                )
        else:
            violations.append(f"unknown mode {config.mode!r}")

    errors = config.errors
    if errors.kind not in ("none", "power_decay", "custom"):
        violations.append(f"unknown error schedule kind {errors.kind!r}")
    if errors.target not in ("post", "pre", "both"):
        violations.append(f"unknown error injection target {errors.target!r}")
    if errors.amplitude < 0.0:
        violations.append("error amplitude must be nonnegative")
    if errors.kind == "power_decay" and errors.amplitude > 0.0:
        if config.mode == "pointwise" and not (errors.exponent > 2.0):
            violations.append(
                "pointwise-rate hypothesis needs summable (k+1)*||error_k||: "
                f"power decay exponent must exceed 2, got {errors.exponent!r}"
            )
        if config.mode == "ergodic" and not (errors.exponent > 1.0):
            violations.append(
                "ergodic-rate hypothesis needs summable ||error_k||: "
                f"power decay exponent must exceed 1, got {errors.exponent!r}"
            )
    if errors.kind == "custom" and errors.custom_norms is None:
        violations.append("custom error schedule needs custom_norms")

    if config.stop_criterion not in ("certificate", "residual"):
        violations.append(f"unknown stop criterion {config.stop_criterion!r}")
    if config.stop_tol is not None and math.isfinite(config.stop_tol) and config.stop_tol < 0:
        violations.append("stop_tol must be nonnegative")

    z0 = config.z0
    if z0 is not None:
        if z0.n != config.weights.n:
            violations.append(
                f"initial point has {z0.n} blocks but {config.weights.n} weights"
            )
        if config.block_shape is not None and tuple(config.block_shape) != z0.block_shape:
            violations.append(
                f"block_shape {tuple(config.block_shape)} disagrees with initial "
                f"point blocks {z0.block_shape}"
            )
    elif config.block_shape is None:
        violations.append("either z0 or block_shape must be given")

    if violations:
        raise ConfigError(violations)

    if z0 is None:
        z0 = ProductPoint.zeros(config.weights.n, tuple(config.block_shape))
    stop_tol = config.stop_tol
    if stop_tol is not None and not math.isfinite(stop_tol):
        stop_tol = None
    return ValidatedConfig(
        gamma=gamma,
        beta=beta,
        alpha=alpha,
        weights=config.weights,
        lam=lam,
        mode=config.mode,
        errors=errors,
        max_iters=int(config.max_iters),
        stop_tol=stop_tol,
        stop_criterion=config.stop_criterion,
        z0=z0,
        retain_history=bool(config.retain_history),
    )


class SolverState:
    """Mutable solver state; exclusive to one run.

    After ``k`` completed sweeps, ``z``/``x`` hold the current iterate
    while the ``*_prev`` fields plus ``a``, ``u``, ``v``, ``eps``,
    ``e`` and ``grad`` describe the sweep that produced it.
    """

    __slots__ = (
        "k", "z", "x", "weights", "gamma", "rng",
        "z_prev", "x_prev", "lam_prev", "grad", "a", "u", "v", "eps", "e",
        "Lam", "sum_e", "sum_u", "sum_x",
    )

    def __init__(self, z0: ProductPoint, weights: Weights, gamma: float, seed: int):
        self.k = 0
        self.z = z0
        self.x = weighted_block_sum(z0, weights)
        self.weights = weights
        self.gamma = gamma
        self.rng = np.random.default_rng(np.random.PCG64(seed))
        self.z_prev = None
        self.x_prev = None
        self.lam_prev = None
        self.grad = None
        self.a = None
        self.u = None
        self.v = None
        self.eps = None
        self.e = None
        self.Lam = 0.0
        self.sum_e = np.zeros_like(z0.data)
        self.sum_u = np.zeros_like(z0.data)
        self.sum_x = np.zeros_like(self.x)


def initial_state(problem: SplitProblem, vcfg: ValidatedConfig) -> SolverState:
    return SolverState(vcfg.z0, vcfg.weights, vcfg.gamma, vcfg.errors.seed)


def _unit_product_direction(rng, n, block_shape, weights) -> ProductPoint:
    d = rng.standard_normal((n, *block_shape))
    pt = ProductPoint(d)
    nrm = weighted_norm(pt, weights)
    if nrm == 0.0:
        return pt
    return pt * (1.0 / nrm)


def _draw_errors(state: SolverState, errors: ErrorSchedule, k: int, block_shape):
    """Pre- and post-prox perturbations for sweep ``k`` (either may be None)."""
    target_norm = errors.norm_at(k)
    if target_norm <= 0.0:
        return None, None
    n = state.weights.n
    pre = post = None
    if errors.target in ("pre", "both"):
        amp = target_norm if errors.target == "pre" else 0.5 * target_norm
        if errors.shared_pre:
            d = state.rng.standard_normal(block_shape)
            nrm = float(np.linalg.norm(d.reshape(-1)))
            if nrm > 0.0:
                pre = lift(d * (amp / nrm), n)
        else:
            pre = _unit_product_direction(state.rng, n, block_shape, state.weights) * amp
    if errors.target in ("post", "both"):
        amp = target_norm if errors.target == "post" else 0.5 * target_norm
        post = _unit_product_direction(state.rng, n, block_shape, state.weights) * amp
    return pre, post


def _prox_sweep(problem: SplitProblem, z: ProductPoint, x: Block, grad: Block,
                gamma: float, weights: Weights, shift: Optional[ProductPoint]):
    """Prox arguments ``a_i = 2x - z_i - gamma*grad (+ shift_i)`` and outputs."""
    drive = 2.0 * x - gamma * grad
    a_data = drive[None, ...] - z.data
    if shift is not None:
        a_data = a_data + shift.data
    blocks = []
    for i, term in enumerate(problem.simple_terms):
        blocks.append(term.evaluate(a_data[i], gamma / weights.w[i]))
    return a_data, blocks


def _ergodic_residual(state: SolverState, problem: SplitProblem):
    """Ergodic residual norm and certificate from the running sums."""
    inv = 1.0 / state.Lam
    ebar = ProductPoint(state.sum_e * inv)
    ubar = ProductPoint(state.sum_u * inv)
    xbar = state.sum_x * inv
    ubar_mix = weighted_block_sum(ubar, state.weights)
    gbar = (xbar - ubar_mix) / state.gamma - problem.smooth.gradient(xbar)
    resid = gbar + problem.smooth.gradient(ubar_mix)
    return ebar, ubar, xbar, gbar, float(np.linalg.norm(resid.reshape(-1)))


def gfb_iterate(state: SolverState, problem: SplitProblem, vcfg: ValidatedConfig):
    """Advance one sweep; returns the state and the per-iteration record.

    The exact prox outputs (no injected error) are always computed so
    the residual and the certificate refer to the unperturbed map; the
    perturbed outputs drive the actual update.
    """
    k = state.k
    if k >= vcfg.lam.size:
        raise ValueError(f"no relaxation value materialized for iteration {k}")
    lam = float(vcfg.lam[k])
    w = state.weights
    gamma = state.gamma
    n = w.n
    z, x = state.z, state.x

    grad = np.asarray(problem.smooth.gradient(x), dtype=np.float64)
    pre, post = _draw_errors(state, vcfg.errors, k, z.block_shape)
    try:
        a_data, u_blocks = _prox_sweep(problem, z, x, grad, gamma, w, None)
        u = ProductPoint.from_blocks(u_blocks)
        if pre is None and post is None:
            v = u
            eps = None
            eps_norm = 0.0
        else:
            if pre is not None:
                _, v_blocks = _prox_sweep(problem, z, x, grad, gamma, w, pre)
                v = ProductPoint.from_blocks(v_blocks)
            else:
                v = u
            if post is not None:
                v = v + post
            eps = v - u
            eps_norm = weighted_norm(eps, w)

        e = lift(x, n) - u
        e_norm = weighted_norm(e, w)

        # First-order certificate from the exact prox outputs.
        u_mix = weighted_block_sum(u, w)
        g = (x - u_mix) / gamma - grad
        g_residual = float(np.linalg.norm((g + problem.smooth.gradient(u_mix)).reshape(-1)))
        a_pp = ProductPoint(a_data)
        g_gap = float(
            np.linalg.norm(
                (weighted_block_sum(a_pp - u, w) / gamma - g).reshape(-1)
            )
        )

        objective = math.nan
        if problem.objective is not None:
            objective = float(problem.objective(x))

        z_new = z + lam * (v - lift(x, n))
        x_new = weighted_block_sum(z_new, w)
    except ValueError as exc:
        raise NumericalFailure(k, str(exc), state) from exc
    if not np.all(np.isfinite(x_new)):
        raise NumericalFailure(k, "iterate became non-finite", state)

    # Cross-check the two residual formulas: definition vs update difference.
    e_upd = (z - z_new) * (1.0 / lam)
    if eps is not None:
        e_upd = e_upd + eps
    xcheck = weighted_norm(e - e_upd, w)
    if xcheck > RESIDUAL_XCHECK_TOL:
        raise NumericalFailure(
            k, f"residual formulas disagree by {xcheck:.3e}", state
        )

    # Ergodic accumulators (weighted by the current relaxation).
    state.Lam += lam
    state.sum_e = state.sum_e + lam * e.data
    state.sum_u = state.sum_u + lam * u.data
    state.sum_x = state.sum_x + lam * x
    _, _, _, _, gbar_residual = _ergodic_residual(state, problem)
    ebar_norm = weighted_norm(ProductPoint(state.sum_e * (1.0 / state.Lam)), w)

    state.z_prev, state.x_prev, state.lam_prev = z, x, lam
    state.grad, state.a, state.u, state.v = grad, a_pp, u, v
    state.eps, state.e = eps, e
    state.z, state.x = z_new, x_new
    state.k = k + 1

    record = {
        "k": k,
        "lam": lam,
        "eps_norm": eps_norm,
        "e_norm": e_norm,
        "ebar_norm": ebar_norm,
        "g_residual": g_residual,
        "gbar_residual": gbar_residual,
        "objective": objective,
        "g_gap": g_gap,
    }
    return state, record


def apply_T(z: ProductPoint, problem: SplitProblem, config) -> ProductPoint:
    """Apply the unrelaxed splitting map ``T`` exactly.

    ``config`` may be a :class:`GfbConfig` or a :class:`ValidatedConfig`;
    only its step size and weights are used.  One exact relaxed sweep
    from ``z`` equals ``z + lam*(apply_T(z) - z)``.
    """
    gamma = float(config.gamma)
    weights = config.weights
    beta = problem.smooth.beta
    if not (0.0 < gamma < 2.0 * beta):
        raise ConfigError([
            f"gamma={gamma!r} outside ]0, {2.0 * beta!r}[ "
            "(admissible-step condition for the averaged splitting map)"
        ])
    if weights.n != problem.n:
        raise ValueError(f"problem has {problem.n} terms but {weights.n} weights")
    x = weighted_block_sum(z, weights)
    grad = np.asarray(problem.smooth.gradient(x), dtype=np.float64)
    _, u_blocks = _prox_sweep(problem, z, x, grad, gamma, weights, None)
    u = ProductPoint.from_blocks(u_blocks)
    return u + (z - lift(x, z.n))


def residual_e(state: SolverState):
    """Fixed-point residual of the last completed sweep.

    Evaluates both formulas (``(Id - T) z`` and the relaxed update
    difference plus the injected error) and verifies they agree within
    ``RESIDUAL_XCHECK_TOL``; returns the residual and its weighted norm.
    """
    if state.k == 0 or state.e is None:
        raise ValueError("no completed iteration in this state")
    e = state.e
    e_upd = (state.z_prev - state.z) * (1.0 / state.lam_prev)
    if state.eps is not None:
        e_upd = e_upd + state.eps
    gap = weighted_norm(e - e_upd, state.weights)
    if gap > RESIDUAL_XCHECK_TOL:
        raise NumericalFailure(
            state.k - 1, f"residual formulas disagree by {gap:.3e}", state
        )
    return e, weighted_norm(e, state.weights)


def certificate_g(state: SolverState, problem: SplitProblem):
    """First-order certificate of the last completed sweep.

    Returns ``g`` (an explicit element of the summed subdifferentials at
    the exact prox outputs) and the optimality residual
    ``||g + grad_f(sum_i w_i u_i)||``.
    """
    if state.k == 0 or state.u is None:
        raise ValueError("no completed iteration in this state")
    gamma = state.gamma
    u_mix = weighted_block_sum(state.u, state.weights)
    g = (state.x_prev - u_mix) / gamma - state.grad
    resid = float(np.linalg.norm((g + problem.smooth.gradient(u_mix)).reshape(-1)))
    return g, resid


def ergodic_read(state: SolverState, problem: SplitProblem):
    """Ergodic averages accumulated so far.

    Returns ``(ebar, ubar, xbar, gbar, residual)`` where the averages
    are weighted by the relaxation sequence and ``residual`` is the
    ergodic certificate residual.
    """
    if state.Lam <= 0.0:
        raise ValueError("no completed iteration in this state")
    return _ergodic_residual(state, problem)


class IterationTrace:
    """Per-iteration observability of one run.

    Scalar columns are always recorded; the product-space histories
    (iterates, residuals, injected errors) are kept only when the
    configuration asks for them.  ``diff_e_norm[k]`` is
    ``||e_{k+1} - e_k||``, one entry shorter than the other columns.
    """

    def __init__(self, vcfg: ValidatedConfig):
        self.gamma = vcfg.gamma
        self.beta = vcfg.beta
        self.alpha = vcfg.alpha
        self.mode = vcfg.mode
        self.weights = vcfg.weights
        self.error_schedule = vcfg.errors
        self.z0 = vcfg.z0.copy()
        self.retained = vcfg.retain_history
        self.stop_reason = None
        self._records = []
        self.diff_e_norm = []
        self.z_history = [vcfg.z0.copy()] if self.retained else None
        self.e_history = [] if self.retained else None
        self.eps_history = [] if self.retained else None
        self._final = False

    def append(self, record, state: SolverState):
        self._records.append(record)
        if self.retained:
            self.z_history.append(state.z)
            self.e_history.append(state.e)
            eps = state.eps
            if eps is None:
                eps = ProductPoint(np.zeros_like(state.e.data))
            self.eps_history.append(eps)

    def finalize(self, stop_reason: str):
        self.stop_reason = stop_reason
        for name in ("lam", "eps_norm", "e_norm", "ebar_norm", "g_residual",
                     "gbar_residual", "objective", "g_gap"):
            setattr(self, name, np.array([r[name] for r in self._records]))
        self.diff_e_norm = np.asarray(self.diff_e_norm, dtype=np.float64)
        self._final = True

    @property
    def iterations(self) -> int:
        return len(self._records)

    def records(self):
        return list(self._records)


def run(problem: SplitProblem, config: GfbConfig,
        callback: Optional[Callable[[SolverState], None]] = None):
    """Iterate until the stopping criterion or the iteration cap.

    The stopping quantity (certificate residual by default, fixed-point
    residual otherwise) is compared squared against ``stop_tol``.
    Returns the finalized trace and the final state; ``callback`` runs
    after every completed sweep.
    """
    vcfg = validate_config(problem, config)
    state = initial_state(problem, vcfg)
    trace = IterationTrace(vcfg)
    prev_e = None
    stop_reason = "max_iters"
    for _ in range(vcfg.max_iters):
        state, record = gfb_iterate(state, problem, vcfg)
        if prev_e is not None:
            trace.diff_e_norm.append(weighted_norm(state.e - prev_e, vcfg.weights))
        prev_e = state.e
        trace.append(record, state)
        if callback is not None:
            callback(state)
        if vcfg.stop_tol is not None:
            quantity = record["g_residual"] if vcfg.stop_criterion == "certificate" \
                else record["e_norm"]
            if quantity * quantity <= vcfg.stop_tol:
                stop_reason = "tolerance"
                break
    trace.finalize(stop_reason)
    return trace, state
