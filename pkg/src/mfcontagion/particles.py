"""Finite particle system with common noise, absorption at 0 and cascades.

Each step moves the surviving particles by an Euler-Maruyama increment and
then resolves the contagion cascade: the step loss is the smallest ``k/N``
such that shifting every survivor down by ``alpha (f(L + k/N) - f(L))``
puts no more than ``k`` of them at or below the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    Density,
    InitialCondition,
    Jump,
    LossPath,
    ModelParams,
    SaturationError,
    SpaceGrid,
    TimeGrid,
    ValidationError,
)
from .stochastic import (
    INIT_INDEX,
    Forcing,
    forcing_value,
    idiosyncratic_increments,
    uniforms,
)

__all__ = [
    "ParticleState",
    "CascadeResult",
    "ParticleRun",
    "initial_state",
    "diffuse_step",
    "resolve_cascade",
    "run_particle_system",
    "empirical_density",
]


@dataclass(frozen=True, eq=False)
class ParticleState:
    """Positions and survival flags of ``N`` particles at time index ``k``.

    Dead particles keep the position they had when they were absorbed.
    """

    positions: np.ndarray
    alive: np.ndarray
    k: int = 0

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        alive = np.array(self.alive, dtype=bool)
        if pos.ndim != 1 or pos.shape != alive.shape:
            raise ValidationError("positions and alive flags must be 1-d arrays of equal length")
        pos.flags.writeable = False
        alive.flags.writeable = False
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "alive", alive)

    @property
    def n(self) -> int:
        return self.positions.size

    @property
    def absorbed_count(self) -> int:
        return int(self.n - np.count_nonzero(self.alive))

    @property
    def loss(self) -> float:
        return self.absorbed_count / self.n


@dataclass(frozen=True)
class CascadeResult:
    k_absorbed: int
    rounds: int
    shift: float
    state: ParticleState = field(repr=False)
    diffusive: int = 0  # particles already at or below 0 before any feedback


def initial_state(init: InitialCondition, n_particles: int, seed: int) -> ParticleState:
    """Draw ``N`` i.i.d. starting points (all equal to ``x0`` for a Dirac)."""
    if n_particles < 1:
        raise ValidationError(f"need at least one particle, got {n_particles}")
    if init.is_dirac:
        pos = np.full(n_particles, init.params[0])
    else:
        u = uniforms(seed, np.arange(1, n_particles + 1, dtype=np.uint64), np.uint64(INIT_INDEX))
        pos = init.ppf(u)
    return ParticleState(pos, np.ones(n_particles, dtype=bool), 0)


def diffuse_step(
    state: ParticleState,
    params: ModelParams,
    common: Forcing | float,
    idio: np.ndarray,
    dt: float,
) -> ParticleState:
    """Euler-Maruyama move of the survivors over one step, no feedback.

    ``common`` is either a :class:`Forcing` (read at step ``state.k``) or the
    common displacement itself; ``idio`` holds the idiosyncratic Brownian
    increments, one per particle.
    """
    k = state.k
    t = k * dt
    dW0 = forcing_value(common, params, k) if isinstance(common, Forcing) else float(common)
    s = params.sigma_at(t)
    r = params.rho_at(t)
    x = state.positions
    alive = state.alive
    step = params.drift(t, x) * dt + s * math.sqrt(1.0 - r * r) * np.asarray(idio, dtype=float) + dW0
    new = np.where(alive, x + step, x)
    return ParticleState(new, alive, k + 1)


def _shift_table(params: ModelParams, L: float, n_total: int, kmax: int) -> np.ndarray:
    ks = np.arange(kmax + 1)
    if params.alpha == 0:
        return np.zeros(kmax + 1)
    tr = params.transform
    if tr.kind == "linear":
        return params.alpha * ks / n_total
    hi = L + ks / n_total
    out = np.full(kmax + 1, np.inf)
    ok = hi < params.L_max if tr.singular else np.ones_like(hi, dtype=bool)
    out[ok] = params.alpha * (tr.f(hi[ok]) - tr.f(L))
    return out


def resolve_cascade(state: ParticleState, params: ModelParams) -> CascadeResult:
    """Absorb the minimal cascade at the current time.

    Returns the number absorbed, the rounds the naive absorb-and-shift loop
    would need to reach the same answer, and the post-cascade state in which
    every survivor has been shifted down by the final displacement.
    """
    alive = state.alive
    x = state.positions
    n_total = state.n
    L = state.absorbed_count / n_total
    live_idx = np.flatnonzero(alive)
    xa = x[live_idx]
    diffusive = int(np.count_nonzero(xa <= 0.0))
    if diffusive == 0:
        return CascadeResult(0, 0, 0.0, state, 0)

    order = np.argsort(xa, kind="stable")
    xs = xa[order]
    m = xs.size
    shifts = _shift_table(params, L, n_total, m)
    # counts[k] = survivors at or below the shift caused by k losses
    counts = np.searchsorted(xs, shifts, side="right")
    k = diffusive
    rounds = 1
    while counts[k] > k:
        k = int(counts[k])
        rounds += 1
    shift = float(shifts[k])
    if not math.isfinite(shift):
        raise SaturationError(
            f"cascade saturated the {params.transform.kind} transform at L={L + k / n_total}",
            state.k,
        )
    dead = live_idx[order[:k]]
    new_alive = alive.copy()
    new_alive[dead] = False
    new_pos = np.where(new_alive, x - shift, x)
    return CascadeResult(k, rounds, shift, ParticleState(new_pos, new_alive, state.k), diffusive)


@dataclass(frozen=True, eq=False)
class ParticleRun:
    loss: LossPath
    snapshots: list[ParticleState]
    saturated: bool = False
    saturation_index: int | None = None
    final_state: ParticleState | None = None


def run_particle_system(
    params: ModelParams,
    init: InitialCondition,
    grid: TimeGrid,
    n_particles: int,
    common: Forcing,
    idio_seed: int,
    snapshot_every: int = 0,
    on_saturation: str = "stop",
) -> ParticleRun:
    """Simulate ``N`` particles on ``grid`` and record ``L^N`` at every step.

    A saturated singular transform stops the run (``on_saturation="stop"``),
    leaving the loss flat afterwards, or re-raises (``"raise"``).
    """
    params.validate(grid)
    if common.grid != grid:
        raise ValidationError("common forcing lives on a different time grid")
    state = initial_state(init, n_particles, idio_seed)
    values = np.zeros(grid.n_steps + 1)
    jumps: list[Jump] = []
    snaps = [state] if snapshot_every else []
    saturated_at = None
    for k in range(grid.n_steps):
        dB = idiosyncratic_increments(idio_seed, k, n_particles, grid.dt)
        moved = diffuse_step(state, params, common, dB, grid.dt)
        try:
            res = resolve_cascade(moved, params)
        except SaturationError:
            if on_saturation == "raise":
                raise
            saturated_at = k + 1
            values[k + 1 :] = values[k]
            break
        state = res.state
        values[k + 1] = state.loss
        if res.k_absorbed:
            cause = "cascade" if res.k_absorbed > res.diffusive else "diffusion-step"
            jumps.append(Jump(k + 1, res.k_absorbed / n_particles, cause))
        if snapshot_every and (k + 1) % snapshot_every == 0:
            snaps.append(state)
    loss = LossPath(grid, values, tuple(jumps))
    return ParticleRun(loss, snaps, saturated_at is not None, saturated_at, state)


def empirical_density(state: ParticleState, grid: SpaceGrid) -> Density:
    """Histogram of survivors on the grid nodes.

    Interior nodes own cells of width ``dx``, the two end nodes half cells,
    so the trapezoid mass equals the surviving fraction inside ``[0, u]``.
    Survivors above ``u`` are reported as leaked mass.
    """
    n = state.n
    x = state.positions[state.alive]
    x = x[x >= 0.0]
    top = grid.last_node
    inside = x[x <= top]
    idx = np.minimum(np.floor(inside / grid.dx + 0.5).astype(np.int64), grid.n_points - 1)
    counts = np.bincount(idx, minlength=grid.n_points).astype(float)
    widths = grid.weights()
    values = counts / (n * widths)
    return Density(grid, values, leaked_mass=float((x > top).sum()) / n)
