"""Shared fixtures: small solved instances reused across test modules."""

import numpy as np
import pytest

from gfbsplit import (
    ErrorSchedule,
    GfbConfig,
    PcpParams,
    SplitProblem,
    SmoothOracle,
    Weights,
    box_prox_oracle,
    build_problem,
    estimate_fixed_point,
    run,
    synth_instance,
)


def make_builtin_1d() -> SplitProblem:
    """Scalar problem: pull toward 4, constrained to [0, 1]; minimizer 1."""
    box = box_prox_oracle(0.0, 1.0)

    def value(x):
        return 0.5 * float(np.sum((x - 4.0) ** 2))

    return SplitProblem(
        smooth=SmoothOracle(gradient=lambda x: x - 4.0, beta=1.0, value=value),
        simple_terms=(box,),
        objective=lambda x: value(x) + box.value(x),
    )


@pytest.fixture(scope="session")
def builtin_1d():
    return make_builtin_1d()


def builtin_1d_config(**overrides) -> GfbConfig:
    base = dict(
        gamma=1.0,
        weights=Weights.uniform(1),
        relaxation=1.0,
        max_iters=50,
        stop_tol=None,
        block_shape=(1,),
    )
    base.update(overrides)
    return GfbConfig(**base)


@pytest.fixture(scope="session")
def small_pcp():
    """A 20x15 noiseless instance whose solve is fast and well conditioned."""
    params = PcpParams(rows=20, cols=15, rank=2, sparse_frac=0.05,
                       noise_std=0.0, seed=7)
    instance = synth_instance(params)
    problem, config = build_problem(instance, params)
    return params, instance, problem, config


@pytest.fixture(scope="session")
def small_pcp_zstar(small_pcp):
    _, _, problem, config = small_pcp
    z_star, quality = estimate_fixed_point(problem, config)
    assert quality <= 1e-12
    return z_star, quality


@pytest.fixture(scope="session")
def small_pcp_run_hist(small_pcp):
    """Exact run with retained histories, for trace-level invariants."""
    _, _, problem, config = small_pcp
    cfg = GfbConfig(
        gamma=config.gamma,
        weights=config.weights,
        relaxation=1.0,
        max_iters=250,
        stop_tol=None,
        mode="pointwise",
        block_shape=config.block_shape,
        retain_history=True,
    )
    trace, state = run(problem, cfg)
    return cfg, trace, state


@pytest.fixture(scope="session")
def small_pcp_run_inexact(small_pcp):
    """Inexact run (pre+post injection) with retained histories."""
    _, _, problem, config = small_pcp
    cfg = GfbConfig(
        gamma=config.gamma,
        weights=config.weights,
        relaxation=1.0,
        errors=ErrorSchedule.power_decay(5e-2, 2.5, seed=11, target="both"),
        max_iters=250,
        stop_tol=None,
        mode="pointwise",
        block_shape=config.block_shape,
        retain_history=True,
    )
    trace, state = run(problem, cfg)
    return cfg, trace, state
