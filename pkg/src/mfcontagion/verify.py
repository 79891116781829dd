"""Quick invariant suites run by ``mfcontagion verify``.

Each check returns a :class:`Check`; the suite is sized to finish in well
under a minute on one core. The full-size versions live in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .analysis import Verdict, curb_time, static_verdict
from .core import (
    Density,
    InitialCondition,
    ModelParams,
    SpaceGrid,
    TimeGrid,
    cdf,
    shift_density,
    total_mass,
)
from .particles import ParticleState, resolve_cascade
from .solver import SolverConfig, run_density_solver
from .stochastic import Forcing, derive_seed, generate_noise

__all__ = ["Check", "naive_cascade", "run_suite", "CHECKS"]


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


def naive_cascade(positions: np.ndarray, alive: np.ndarray, params: ModelParams) -> int:
    """Absorb-and-shift rounds until nothing new falls below the shifted origin."""
    n = positions.size
    L = (n - int(np.count_nonzero(alive))) / n
    x = positions[alive]
    k = int(np.count_nonzero(x <= 0))
    if k == 0:
        return 0
    while True:
        shift = params.shift(L, k / n)
        k_new = int(np.count_nonzero(x <= shift))
        if k_new <= k:
            return k
        k = k_new


def _cascade_oracle(n_configs: int, seed: int) -> Check:
    rng = np.random.default_rng(seed)
    for i in range(n_configs):
        n = int(rng.integers(1, 51))
        alpha = float(rng.uniform(0, 3)) or 1.0
        pos = rng.uniform(-0.2, 2.0, n)
        alive = rng.random(n) > 0.2
        p = ModelParams(alpha=alpha)
        got = resolve_cascade(ParticleState(pos, alive), p).k_absorbed
        want = naive_cascade(pos, alive, p)
        if got != want:
            return Check("cascade-oracle", False, f"config {i}: fast {got} != naive {want}")
    return Check("cascade-oracle", True, f"{n_configs} random configurations agree")


def _cdf_and_shift(n_densities: int, seed: int) -> Check:
    rng = np.random.default_rng(seed)
    g = SpaceGrid(0.01, 4.0)
    for _ in range(n_densities):
        d = Density(g, rng.random(g.n_points) * 0.5)
        c = [cdf(d, x) for x in np.linspace(0, 5, 101)]
        if np.any(np.diff(c) < -1e-15):
            return Check("cdf-and-shift", False, "cdf decreased")
        a, b = rng.uniform(0, 1, 2)
        two = shift_density(shift_density(d, a), b)
        one = shift_density(d, a + b)
        if np.max(np.abs(two.values - one.values)) > 2 * np.max(np.abs(np.diff(d.values))) + 1e-12:
            return Check("cdf-and-shift", False, f"shift composition off for a={a}, b={b}")
        if total_mass(one) > total_mass(d) + 1e-12:
            return Check("cdf-and-shift", False, "shift created mass")
    return Check("cdf-and-shift", True, f"{n_densities} random densities")


def _solver_invariants(n_runs: int, seed: int) -> Check:
    rng = np.random.default_rng(seed)
    tg = TimeGrid.from_horizon(0.5, 2e-3)
    sg = SpaceGrid(5e-3, 6.0)
    cfg = SolverConfig(tg, sg)
    worst_cons = worst_sup = 0.0
    late = 0
    for i in range(n_runs):
        rho = float(rng.uniform(0, 0.8))
        p = ModelParams(alpha=float(rng.uniform(0, 1.5)), rho=rho, sigma=float(rng.uniform(0.7, 1.3)))
        init = InitialCondition.uniform(*sorted(rng.uniform(0.2, 3.0, 2)))
        noise = generate_noise(derive_seed(seed, i), tg)
        out = run_density_solver(p, init, cfg, Forcing.brownian(noise))
        worst_cons = max(worst_cons, float(np.max(np.abs(out.conservation_error))))
        t = tg.times[1 : out.sup_norm.size]
        bound = 1.0 / np.sqrt(2 * math.pi * p.sigma**2 * (1 - rho**2) * t)
        worst_sup = max(worst_sup, float(np.max(out.sup_norm[1:] - bound)))
        late += sum(e.time > curb_time(p) for e in out.blowup_events)
    ok = worst_cons <= 10 * (sg.dx + tg.dt) and worst_sup <= 10 * sg.dx and late == 0
    return Check(
        "solver-invariants",
        ok,
        f"{n_runs} runs: max conservation error {worst_cons:.3g}, max sup-norm excess {worst_sup:.3g}, late events {late}",
    )


def _verdict_consistency() -> Check:
    tg = TimeGrid.from_horizon(1.0, 2e-3)
    cfg = SolverConfig(tg, SpaceGrid(2e-3, 6.0))
    p = ModelParams(alpha=1.0)
    cases = [InitialCondition.dirac(0.4), InitialCondition.uniform(2.0, 2.5)]
    for init in cases:
        v = static_verdict(init, p).value
        out = run_density_solver(p, init, cfg, Forcing.none(tg))
        if (v is Verdict.MUST_BLOW_UP) != out.blew_up:
            return Check("verdict-consistency", False, f"{init.spec()}: verdict {v.value}, events {len(out.blowup_events)}")
    return Check("verdict-consistency", True, "decided cases match the solver")


def _determinism() -> Check:
    tg = TimeGrid.from_horizon(0.2, 1e-3)
    p = ModelParams(alpha=1.0, rho=0.5)
    cfg = SolverConfig(tg, SpaceGrid(5e-3, 5.0))
    a = run_density_solver(p, InitialCondition.dirac(0.5), cfg, Forcing.brownian(generate_noise(7, tg)))
    b = run_density_solver(p, InitialCondition.dirac(0.5), cfg, Forcing.brownian(generate_noise(7, tg)))
    same = a.loss.values.tobytes() == b.loss.values.tobytes()
    return Check("determinism", same, "replayed solve is bit-identical" if same else "replay differs")


CHECKS: dict[str, Callable[[], Check]] = {
    "cascade-oracle": lambda: _cascade_oracle(5000, 1),
    "cdf-and-shift": lambda: _cdf_and_shift(50, 2),
    "solver-invariants": lambda: _solver_invariants(5, 3),
    "verdict-consistency": _verdict_consistency,
    "determinism": _determinism,
}


def run_suite(names=None) -> list[Check]:
    return [CHECKS[n]() for n in (names or CHECKS)]
