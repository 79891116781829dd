"""Closed-form blow-up predicates and Monte Carlo blow-up frequencies.

The predicates are sound but far from complete, so ``Indeterminate`` is the
usual answer outside the idiosyncratic (``rho = 0``) linear model.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .core import (
    DomainError,
    GridMismatchError,
    InitialCondition,
    LossPath,
    ModelParams,
)
from .solver import SolverConfig, run_density_solver
from .stochastic import Forcing, derive_seed, generate_noise

__all__ = [
    "Verdict",
    "BlowupVerdict",
    "BlowupProbEstimate",
    "OrderingReport",
    "curb_time",
    "static_verdict",
    "moment_criterion",
    "wilson_interval",
    "estimate_blowup_probability",
    "compare_losses",
]


class Verdict(enum.Enum):
    MUST_BLOW_UP = "MustBlowUp"
    NEVER_BLOWS_UP = "NeverBlowsUp"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class BlowupVerdict:
    value: Verdict
    reason: str
    # (criterion name, applicable, fired) for every check that was looked at
    table: tuple[tuple[str, bool, bool], ...] = ()


def _min_diffusivity(params: ModelParams, horizon: float | None = None) -> float:
    """Smallest ``sigma^2 (1 - rho^2)``; exact for constants, sampled otherwise."""
    if not callable(params.rho) and not callable(params.sigma):
        return float(params.sigma) ** 2 * (1.0 - float(params.rho) ** 2)
    t = np.linspace(0.0, horizon if horizon else 1.0, 2001)
    s = np.broadcast_to(params.sigma_at(t), t.shape)
    r = np.broadcast_to(params.rho_at(t), t.shape)
    return float(np.min(s * s * (1.0 - r * r)))


def curb_time(params: ModelParams, horizon: float | None = None) -> float:
    """Time after which the kernel bound ``(2 pi v t)^(-1/2) < 1/alpha`` rules out jumps.

    ``v = min_t sigma(t)^2 (1 - rho(t)^2)``. Time-dependent coefficients are
    sampled on ``[0, horizon]``.
    """
    return params.alpha**2 / (2.0 * math.pi * _min_diffusivity(params, horizon))


def moment_criterion(m0: float, params: ModelParams, L: float) -> bool:
    """Whether ``m0 < alpha (F(L) + (1 - L) f(L))`` holds.

    ``L = 1`` is accepted as the limit ``L -> 1``: ``alpha F(1)`` for a finite
    antiderivative, always true when ``F`` diverges.
    """
    tr = params.transform
    if not 0.0 <= L <= 1.0:
        raise DomainError(f"L={L} outside [0, 1] for the {tr.kind} transform")
    if L == 1.0:
        if tr.integral_diverges:
            return params.alpha > 0
        # (1 - L) f(L) -> 0 for every transform with integrable f
        return m0 < params.alpha * float(tr.antiderivative(1.0 - 1e-15))
    if tr.singular and L >= params.L_max:
        raise DomainError(f"L={L} is at or beyond L_max={params.L_max} for the {tr.kind} transform")
    rhs = params.alpha * (float(tr.antiderivative(L)) + (1.0 - L) * float(tr.f(L)))
    return m0 < rhs


def static_verdict(init: InitialCondition, params: ModelParams) -> BlowupVerdict:
    """Decide blow-up from the initial law alone where a closed form applies.

    All criteria need ``rho = 0`` and zero spatial drift. With common noise
    present the answer is random, hence ``Indeterminate``.
    """
    a = params.alpha
    rows: list[tuple[str, bool, bool]] = []
    if not params.rho_is_zero:
        return BlowupVerdict(Verdict.INDETERMINATE, "common noise present: blow-up is a random event")
    if not params.drift.is_zero:
        return BlowupVerdict(Verdict.INDETERMINATE, "criteria assume zero spatial drift")
    if a == 0:
        return BlowupVerdict(Verdict.NEVER_BLOWS_UP, "alpha = 0: no feedback", (("alpha = 0", True, True),))
    lo, hi = init.support()
    linear = params.transform.kind == "linear"
    m0 = init.mean()

    if linear:
        sup = init.sup_density()
        fired = sup < 1.0 / a
        rows.append(("sup density < 1/alpha", True, fired))
        if fired:
            return BlowupVerdict(Verdict.NEVER_BLOWS_UP, f"sup density {sup:.6g} < 1/alpha", tuple(rows))
        fired = lo > 1.25 * a
        rows.append(("support in (5 alpha/4, inf)", True, fired))
        if fired:
            return BlowupVerdict(Verdict.NEVER_BLOWS_UP, f"support starts at {lo:.6g} > 5 alpha/4", tuple(rows))
        fired = hi < 0.5 * a
        rows.append(("support in (0, alpha/2)", True, fired))
        if fired:
            return BlowupVerdict(Verdict.MUST_BLOW_UP, f"support ends at {hi:.6g} < alpha/2", tuple(rows))
        fired = m0 < 0.5 * a
        rows.append(("mean < alpha/2", True, fired))
        if fired:
            return BlowupVerdict(Verdict.MUST_BLOW_UP, f"mean {m0:.6g} < alpha/2", tuple(rows))
        return BlowupVerdict(Verdict.INDETERMINATE, "no criterion fired", tuple(rows))

    fired = moment_criterion(m0, params, 1.0)
    rows.append((f"mean < alpha (F + (1-L) f) as L -> 1 [{params.transform.kind}]", True, fired))
    if fired:
        reason = (
            "antiderivative of f diverges: blow-up for any initial law"
            if params.transform.integral_diverges
            else f"mean {m0:.6g} below the transformed-loss bound"
        )
        return BlowupVerdict(Verdict.MUST_BLOW_UP, reason, tuple(rows))
    return BlowupVerdict(Verdict.INDETERMINATE, "no criterion fired", tuple(rows))


def wilson_interval(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        return 0.0, 1.0
    z = norm.ppf(0.5 + level / 2.0)
    p = successes / trials
    den = 1.0 + z * z / trials
    centre = (p + z * z / (2 * trials)) / den
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / den
    return max(0.0, float(centre - half)), min(1.0, float(centre + half))


@dataclass(frozen=True)
class BlowupProbEstimate:
    n_paths: int
    n_blowups: int
    p_hat: float
    ci_low: float
    ci_high: float
    deterministic: bool = False

    def csv_row(self) -> str:
        from .io import fmt

        return ",".join([str(self.n_paths), str(self.n_blowups), fmt(self.p_hat), fmt(self.ci_low), fmt(self.ci_high)])

    CSV_HEADER = "n_paths,n_blowups,p_hat,ci_low,ci_high"


def estimate_blowup_probability(
    params: ModelParams,
    init: InitialCondition,
    config: SolverConfig,
    n_paths: int,
    base_seed: int,
    progress=None,
) -> BlowupProbEstimate:
    """Fraction of common-noise paths whose solve has a confirmed blow-up.

    Path ``i`` uses the seed ``derive_seed(base_seed, i)``. Without common
    noise every path gives the same answer, so one solve is run and its
    outcome reported for all ``n_paths``.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    deterministic = params.rho_is_zero
    runs = 1 if deterministic else n_paths
    hits = 0
    for i in range(runs):
        noise = generate_noise(derive_seed(base_seed, i), config.time)
        out = run_density_solver(params, init, config, Forcing.brownian(noise), confirm=True)
        hit = out.blew_up or out.saturated
        hits += hit
        if progress is not None:
            progress(i, hit)
    if deterministic:
        hits *= n_paths
    lo, hi = wilson_interval(hits, n_paths)
    p = hits / n_paths
    return BlowupProbEstimate(n_paths, hits, p, min(lo, p), max(hi, p), deterministic)


@dataclass(frozen=True)
class OrderingReport:
    ordered: bool
    checked_until: int
    first_violation: int | None
    max_excess: float  # max of L_a - L_b over the checked indices


def compare_losses(run_a: LossPath, run_b: LossPath, until: int | None = None, tol: float = 0.0) -> OrderingReport:
    """Check ``L_a <= L_b + tol`` at every index up to ``until`` (inclusive)."""
    if run_a.grid != run_b.grid:
        raise GridMismatchError(f"loss paths live on different grids: {run_a.grid} vs {run_b.grid}")
    n = min(run_a.values.size, run_b.values.size) - 1
    until = n if until is None else min(int(until), n)
    diff = run_a.values[: until + 1] - run_b.values[: until + 1]
    bad = np.flatnonzero(diff > tol)
    first = int(bad[0]) if bad.size else None
    excess = float(diff.max()) if diff.size else 0.0
    return OrderingReport(first is None, until, first, excess)
