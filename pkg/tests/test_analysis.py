from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfcontagion.analysis import (
    Verdict,
    compare_losses,
    curb_time,
    estimate_blowup_probability,
    moment_criterion,
    static_verdict,
    wilson_interval,
)
from mfcontagion.core import (
    Drift,
    GridMismatchError,
    InitialCondition,
    LossPath,
    LossTransform,
    ModelParams,
    SpaceGrid,
    TimeGrid,
)
from mfcontagion.solver import SolverConfig, run_density_solver
from mfcontagion.stochastic import Forcing


def test_curb_time_values():
    assert curb_time(ModelParams(alpha=1.0)) == pytest.approx(0.15915, abs=1e-5)
    assert curb_time(ModelParams(alpha=0.0)) == 0.0
    assert curb_time(ModelParams(alpha=1.0, rho=0.6)) == pytest.approx(0.24868, abs=1e-5)


def test_curb_time_uses_smallest_diffusivity():
    p = ModelParams(alpha=1.0, sigma=lambda t: 1.0 + t)
    assert curb_time(p, horizon=1.0) == pytest.approx(1 / (2 * math.pi), rel=1e-12)


def test_verdict_examples():
    p = ModelParams(alpha=1.0)
    assert static_verdict(InitialCondition.uniform(0.1, 0.4), p).value is Verdict.MUST_BLOW_UP
    assert static_verdict(InitialCondition.dirac(2.0), p).value is Verdict.NEVER_BLOWS_UP
    x = np.linspace(0.0, 2.0, 20001)
    v = np.where((x >= 0.5) & (x <= 1.6111), 0.9, 0.0)
    flat = InitialCondition.tabulated(x, v)
    verdict = static_verdict(flat, p)
    assert verdict.value is Verdict.NEVER_BLOWS_UP and "sup density" in verdict.reason


def test_mean_criterion_and_indeterminate_middle():
    p = ModelParams(alpha=1.0)
    # support reaches past 1/2 but the mean is below it
    assert static_verdict(InitialCondition.uniform(0.05, 0.8), p).value is Verdict.MUST_BLOW_UP
    assert static_verdict(InitialCondition.dirac(1.0), p).value is Verdict.INDETERMINATE


def test_verdict_indeterminate_with_common_noise_or_drift():
    init = InitialCondition.dirac(0.2)
    assert static_verdict(init, ModelParams(alpha=1.0, rho=0.3)).value is Verdict.INDETERMINATE
    assert static_verdict(init, ModelParams(alpha=1.0, drift=Drift.constant(0.1))).value is Verdict.INDETERMINATE


def test_reciprocal_transform_always_blows_up():
    p = ModelParams(alpha=0.1, transform=LossTransform.reciprocal())
    assert static_verdict(InitialCondition.dirac(5.0), p).value is Verdict.MUST_BLOW_UP


def test_moment_criterion_examples():
    p = ModelParams(alpha=1.0)
    assert moment_criterion(0.4, p, 1.0)
    assert not moment_criterion(0.6, p, 1.0)
    assert not moment_criterion(0.01, p, 0.0)
    rec = ModelParams(alpha=0.1, transform=LossTransform.reciprocal())
    assert moment_criterion(1e6, rec, 1.0)
    # finite L: -log(1 - L) has to exceed m0/alpha - 1
    assert not moment_criterion(5.0, rec, 0.99)
    assert moment_criterion(5.0, rec, 1 - math.exp(-50))


def test_moment_criterion_neglog_limit():
    # int_0^1 -log(1 - x) dx = 1
    p = ModelParams(alpha=2.0, transform=LossTransform.neglog())
    assert moment_criterion(1.99, p, 1.0) and not moment_criterion(2.01, p, 1.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 5), st.floats(0.01, 5), st.floats(0.01, 3), st.floats(0, 0.999))
def test_moment_criterion_monotone(m_a, m_b, alpha, L):
    p = ModelParams(alpha=alpha)
    lo, hi = sorted((m_a, m_b))
    if moment_criterion(hi, p, L):
        assert moment_criterion(lo, p, L)
    if moment_criterion(lo, p, L):
        assert moment_criterion(lo, ModelParams(alpha=alpha * 1.5), L)


def test_verdicts_agree_with_solver_on_random_inits():
    rng = np.random.default_rng(5)
    tg = TimeGrid.from_horizon(1.0, 2e-3)
    conf = SolverConfig(tg, SpaceGrid(2e-3, 6.0))
    decided = 0
    for _ in range(12):
        alpha = float(rng.uniform(0.5, 1.5))
        a = float(rng.uniform(0.02, 2.5 * alpha))
        b = a + float(rng.uniform(0.05, 1.0))
        init = InitialCondition.uniform(a, b)
        p = ModelParams(alpha=alpha)
        v = static_verdict(init, p).value
        if v is Verdict.INDETERMINATE:
            continue
        decided += 1
        out = run_density_solver(p, init, conf, Forcing.none(tg))
        assert out.blew_up == (v is Verdict.MUST_BLOW_UP), (alpha, a, b, v)
    assert decided >= 4


def test_wilson_interval_reference_values():
    # reference: 4 of 10 at 95% -> (0.168180, 0.687326)
    lo, hi = wilson_interval(4, 10)
    assert lo == pytest.approx(0.168180, abs=1e-6) and hi == pytest.approx(0.687326, abs=1e-6)
    lo, hi = wilson_interval(0, 20)
    assert lo == 0.0 and 0 < hi < 0.2


def test_deterministic_estimates_need_one_run():
    tg = TimeGrid.from_horizon(0.5, 1e-3)
    conf = SolverConfig(tg, SpaceGrid(2e-3, 5.0))
    p = ModelParams(alpha=1.0)
    near = estimate_blowup_probability(p, InitialCondition.dirac(0.4), conf, 10, 3)
    assert (near.n_blowups, near.p_hat, near.deterministic) == (10, 1.0, True)
    far = estimate_blowup_probability(p, InitialCondition.dirac(2.0), conf, 10, 3)
    assert (far.n_blowups, far.p_hat) == (0, 0.0)
    assert far.ci_low <= far.p_hat <= far.ci_high


def test_random_estimate_is_reproducible():
    tg = TimeGrid.from_horizon(0.3, 2e-3)
    conf = SolverConfig(tg, SpaceGrid(4e-3, 4.0))
    p = ModelParams(alpha=1.0, rho=0.5)
    a = estimate_blowup_probability(p, InitialCondition.dirac(0.4), conf, 6, 11)
    b = estimate_blowup_probability(p, InitialCondition.dirac(0.4), conf, 6, 11)
    assert a == b


def test_compare_losses_examples():
    g = TimeGrid(0.1, 3)
    a = LossPath(g, [0.0, 0.1, 0.2, 0.3])
    assert compare_losses(a, a).ordered
    assert compare_losses(LossPath(g, np.zeros(4)), a).ordered
    rep = compare_losses(a, LossPath(g, [0.0, 0.1, 0.15, 0.3]))
    assert not rep.ordered and rep.first_violation == 2
    assert compare_losses(a, LossPath(g, [0.0, 0.1, 0.15, 0.3]), until=1).ordered
    with pytest.raises(GridMismatchError):
        compare_losses(a, LossPath(TimeGrid(0.2, 3), np.zeros(4)))
