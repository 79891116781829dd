"""Quadrature scheme for the conditional density of the surviving mass.

One time step:

1. convolve the current density with the Gaussian heat kernel of variance
   ``sigma^2 (1 - rho^2) dt``, centred on the common-noise displacement
   (plus the frozen spatial drift), giving a candidate density ``U``;
2. read the diffusive loss off the mass balance;
3. iterate ``dL <- dL0 + int_0^{alpha (f(L + dL) - f(L))} U`` from below
   until the increment drops under ``fp_eps``;
4. translate ``U`` towards the origin by the feedback displacement.

A step whose feedback part exceeds ``jump_threshold`` is flagged as a
blow-up candidate; :func:`run_density_solver` can confirm candidates by
re-running on a halved time step.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import ndtr

from .core import (
    CdfEvaluator,
    Density,
    InitialCondition,
    Jump,
    LossPath,
    ModelParams,
    SaturationError,
    SpaceGrid,
    TimeGrid,
    ValidationError,
    shift_density,
    total_mass,
)
from .stochastic import Forcing, forcing_value

__all__ = [
    "SolverConfig",
    "BlowupEvent",
    "SolverOutput",
    "HeatStep",
    "FixedPoint",
    "heat_step",
    "contagion_fixed_point",
    "jump_size_minimal",
    "run_density_solver",
    "confirm_blowups",
]

log = logging.getLogger(__name__)

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class SolverConfig:
    time: TimeGrid
    space: SpaceGrid
    fp_eps: float = 1e-10
    fp_max_iter: int = 100_000
    jump_threshold: float = 0.05
    image_kernel: bool = False
    snapshot_every: int = 0
    kernel_cutoff: float = 8.0  # kernel truncated at this many standard deviations
    confirm_window: int = 10  # coarse steps within which a refined run must repeat an event

    def __post_init__(self):
        if not self.fp_eps > 0:
            raise ValidationError(f"fixed-point tolerance must be positive, got {self.fp_eps}")
        if self.fp_max_iter < 1:
            raise ValidationError(f"fp_max_iter must be >= 1, got {self.fp_max_iter}")
        if not 0 < self.jump_threshold < 1:
            raise ValidationError(f"jump_threshold must lie in (0, 1), got {self.jump_threshold}")
        if self.snapshot_every < 0:
            raise ValidationError("snapshot_every must be nonnegative")


@dataclass(frozen=True)
class BlowupEvent:
    time_index: int  # L jumps between t_{k-1} and t_k = time_index * dt
    time: float
    step_loss: float
    contagion: float


@dataclass(eq=False)
class SolverOutput:
    loss: LossPath
    snapshots: list[tuple[int, Density]]
    blowup_events: list[BlowupEvent]
    leaked_mass_total: float
    mass: np.ndarray
    leaked: np.ndarray
    sup_norm: np.ndarray
    diffusive_loss: np.ndarray
    contagion_loss: np.ndarray
    fp_iterations: np.ndarray
    fp_converged: np.ndarray
    saturated: bool = False
    saturation_index: int | None = None
    confirmed_events: list[BlowupEvent] | None = None
    final_density: Density | None = field(default=None, repr=False)

    @property
    def conservation_error(self) -> np.ndarray:
        """``L + mass + leaked - 1`` at every recorded time index."""
        return self.loss.values + self.mass + self.leaked - 1.0

    @property
    def blew_up(self) -> bool:
        events = self.confirmed_events if self.confirmed_events is not None else self.blowup_events
        return bool(events)


class HeatStep(NamedTuple):
    density: Density
    upper_leak: float


class FixedPoint(NamedTuple):
    step_loss: float
    iterations: int
    converged: bool
    iterates: tuple[float, ...] = ()


def _gauss(z: np.ndarray, var: float) -> np.ndarray:
    return np.exp(-0.5 * z * z / var) / math.sqrt(2.0 * math.pi * var)


def heat_step(
    V: Density | InitialCondition,
    params: ModelParams,
    drift_shift: float,
    dt: float,
    t: float = 0.0,
    grid: SpaceGrid | None = None,
    image_kernel: bool = False,
    cutoff: float = 8.0,
) -> HeatStep:
    """Candidate density after one step, ignoring the feedback.

    ``U(x_i) = sum_j w_j K(x_i - y_j - mu_j) V(y_j)`` with trapezoid weights
    ``w_j`` and ``mu_j = drift_shift + b(t, y_j) dt``. A Dirac initial
    condition is propagated analytically. Mass carried above the last node
    is returned as ``upper_leak``; mass carried below 0 is not evaluated and
    shows up in the caller's mass balance.

    With ``image_kernel`` the kernel is replaced by the transition density
    of the drifted Brownian motion killed at 0,
    ``K(x - y - mu) (1 - exp(-2 x y / v))``.
    """
    if not dt > 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    var = params.diffusion_variance(t, dt)
    if not var > 0:
        raise ValidationError(f"degenerate step variance {var}; check sigma and rho")
    sd = math.sqrt(var)

    if isinstance(V, InitialCondition):
        if not V.is_dirac:
            raise ValidationError("only Dirac initial conditions are propagated symbolically")
        if grid is None:
            raise ValidationError("a grid is needed to tabulate a Dirac step")
        x0 = V.params[0]
        x = grid.nodes
        mu = drift_shift + float(params.drift(t, np.array([x0]))[0]) * dt
        U = _gauss(x - x0 - mu, var)
        if image_kernel:
            U = U * -np.expm1(-2.0 * x * x0 / var)
        leak = float(ndtr(-(grid.last_node - x0 - mu) / sd))
        return HeatStep(Density(grid, U), leak)

    grid = V.grid
    n = grid.n_points
    dx = grid.dx
    y = grid.nodes
    a = grid.weights() * V.values
    M = int(math.ceil(cutoff * sd / dx))
    drift = params.drift

    if drift.state_independent:
        mu = drift_shift + float(drift(t, np.zeros(1))[0]) * dt
        c = int(round(mu / dx))
        m = np.arange(c - M, c + M + 1)
        kern = _gauss(m * dx - mu, var)
        full = np.convolve(a, kern)
        q = np.arange(n) - (c - M)
        ok = (q >= 0) & (q < full.size)
        U = np.zeros(n)
        U[ok] = full[q[ok]]
        if image_kernel:
            # the reflected term exp(-2xy/v) is negligible unless x, y are both
            # within a few kernel widths of the origin
            reach = abs(mu) + 2 * cutoff * sd
            ni = min(n, int(reach / dx) + 2)
            nj = min(n, int((reach + abs(mu) + cutoff * sd) / dx) + 2)
            xi = y[:ni, None]
            yj = y[None, :nj]
            refl = _gauss(xi - yj - mu, var) * np.exp(-2.0 * xi * yj / var)
            U[:ni] -= refl @ a[:nj]
        mus = mu
    else:
        mus = drift_shift + drift(t, y) * dt
        r = np.rint(mus / dx).astype(np.int64)
        src = np.arange(n)
        U = np.zeros(n)
        live = a > 0
        src, r_l, mu_l, a_l = src[live], r[live], mus[live], a[live]
        y_l = y[live]
        for m in range(-M, M + 1):
            tgt = src + r_l + m
            ok = (tgt >= 0) & (tgt < n)
            if not ok.any():
                continue
            vals = a_l[ok] * _gauss((r_l[ok] + m) * dx - mu_l[ok], var)
            if image_kernel:
                vals = vals * -np.expm1(-2.0 * tgt[ok] * dx * y_l[ok] / var)
            U += np.bincount(tgt[ok], vals, minlength=n)
    leak = float(np.dot(a, ndtr(-(grid.last_node - y - mus) / sd)))
    return HeatStep(Density(grid, np.maximum(U, 0.0), V.leaked_mass), leak)


def contagion_fixed_point(
    U: Density,
    L_prev: float,
    params: ModelParams,
    config: SolverConfig,
    diffusive_loss: float,
    record: bool = False,
) -> FixedPoint:
    """Monotone iteration for the step loss.

    Starting from the diffusive loss ``dL0``, iterate
    ``dL <- dL0 + cdf(U, alpha (f(L_prev + dL) - f(L_prev)))`` and stop the
    first time the increment is below ``config.fp_eps``. Raises
    :class:`SaturationError` if a singular transform is pushed to ``L_max``.
    """
    cdf_u = CdfEvaluator(U)
    dl0 = max(float(diffusive_loss), 0.0)
    shift = params.shift
    dl = dl0
    iterates = [dl] if record else []
    for it in range(1, config.fp_max_iter + 1):
        new = dl0 + cdf_u(shift(L_prev, dl))
        if record:
            iterates.append(new)
        if new - dl < config.fp_eps:
            return FixedPoint(new, it, True, tuple(iterates))
        dl = new
    log.warning("contagion fixed point did not converge in %d iterations", config.fp_max_iter)
    return FixedPoint(dl, config.fp_max_iter, False, tuple(iterates))


def jump_size_minimal(
    cdf_eval: Callable[[float], float],
    alpha: float,
    remaining_mass: float,
    n_scan: int = 4096,
    tol: float = 1e-12,
) -> float:
    """``inf{x > 0 : cdf_eval(alpha x) < x}`` for a nondecreasing ``cdf_eval``.

    The sign of ``g(x) = cdf_eval(alpha x) - x`` is scanned on a uniform
    grid over ``(0, remaining_mass]`` and the first change of sign is
    refined by bisection. Returns 0 when ``g`` is already negative at the
    first scan node.
    """
    top = remaining_mass * (1.0 + 1e-9) + 1e-12
    xs = np.linspace(0.0, top, n_scan + 1)[1:]
    g = np.array([cdf_eval(alpha * x) - x for x in xs])
    neg = np.flatnonzero(g < 0)
    if neg.size == 0:
        # cdf_eval(inf) <= remaining_mass, so this only happens through rounding
        return float(top)
    i = int(neg[0])
    lo, hi = (0.0, float(xs[0])) if i == 0 else (float(xs[i - 1]), float(xs[i]))
    # invariant: g(hi) < 0, and g(lo) >= 0 unless lo is still 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if cdf_eval(alpha * mid) - mid < 0:
            hi = mid
        else:
            lo = mid
    return 0.0 if lo == 0.0 else hi


def run_density_solver(
    params: ModelParams,
    init: InitialCondition,
    config: SolverConfig,
    common: Forcing,
    confirm: bool = False,
    stop_index: int | None = None,
) -> SolverOutput:
    """Run the scheme over ``config.time`` under the given common forcing.

    ``confirm=True`` re-runs on a halved time step and keeps only the
    blow-up candidates that recur within ``config.confirm_window`` coarse
    steps (see :func:`confirm_blowups`). ``stop_index`` ends the run early.
    """
    tg, sg = config.time, config.space
    params.validate(tg)
    if common.grid != tg:
        raise ValidationError("common forcing lives on a different time grid")
    lo, hi = init.support()
    # a density may touch 0; only an atom there would start absorbed
    if lo < 0 or lo >= sg.last_node or (init.kind == "dirac" and lo <= 0):
        raise ValidationError(f"initial condition support [{lo}, {hi}] must lie inside [0, {sg.upper}) with no atom at 0")
    var_min = min(params.diffusion_variance(t, tg.dt) for t in tg.times[:: max(1, tg.n_steps // 100)])
    if math.sqrt(var_min) < 3 * sg.dx:
        log.warning("kernel standard deviation %.3g is under 3 dx; refine dx", math.sqrt(var_min))

    n = tg.n_steps if stop_index is None else min(stop_index, tg.n_steps)
    dt = tg.dt
    L = np.zeros(n + 1)
    mass = np.zeros(n + 1)
    leaked = np.zeros(n + 1)
    sup = np.zeros(n + 1)
    d_loss = np.zeros(n)
    c_loss = np.zeros(n)
    iters = np.zeros(n, dtype=np.int64)
    conv = np.ones(n, dtype=bool)
    events: list[BlowupEvent] = []
    snaps: list[tuple[int, Density]] = []
    causes: list[str] = []

    if init.is_dirac:
        V: Density | InitialCondition = init
        mass[0] = 1.0
        sup[0] = math.inf
    else:
        V = init.density_on(sg)
        mass[0] = total_mass(V)
        sup[0] = V.sup_norm()
        if config.snapshot_every:
            snaps.append((0, V))

    saturated_at = None
    leak_total = 0.0
    forcing_inc = common.increments(params)
    last = 0
    for k in range(n):
        t = k * dt
        hs = heat_step(
            V, params, float(forcing_inc[k]), dt, t, sg, config.image_kernel, config.kernel_cutoff
        )
        U = hs.density
        mass_u = total_mass(U)
        dl0 = max(mass[k] - mass_u - hs.upper_leak, 0.0)
        try:
            fp = contagion_fixed_point(U, L[k], params, config, dl0)
            displacement = params.shift(L[k], fp.step_loss)
        except SaturationError:
            saturated_at = k + 1
            log.info("singular transform saturated at step %d", k + 1)
            break
        leak_total += hs.upper_leak
        V = shift_density(Density(sg, U.values, leak_total), displacement)
        L[k + 1] = L[k] + fp.step_loss
        mass[k + 1] = total_mass(V)
        leaked[k + 1] = leak_total
        sup[k + 1] = V.sup_norm()
        d_loss[k] = dl0
        c_loss[k] = fp.step_loss - dl0
        iters[k] = fp.iterations
        conv[k] = fp.converged
        causes.append("cascade" if c_loss[k] > config.jump_threshold else "diffusion-step")
        if c_loss[k] > config.jump_threshold:
            events.append(BlowupEvent(k + 1, (k + 1) * dt, fp.step_loss, c_loss[k]))
        if config.snapshot_every and (k + 1) % config.snapshot_every == 0:
            snaps.append((k + 1, V))
        last = k + 1

    end = last + 1
    loss = LossPath.from_increments(tg, d_loss[:last] + c_loss[:last], causes)
    out = SolverOutput(
        loss=LossPath(tg, np.minimum(L[:end], 1.0), loss.jumps),
        snapshots=snaps,
        blowup_events=events,
        leaked_mass_total=leak_total,
        mass=mass[:end],
        leaked=leaked[:end],
        sup_norm=sup[:end],
        diffusive_loss=d_loss[:last],
        contagion_loss=c_loss[:last],
        fp_iterations=iters[:last],
        fp_converged=conv[:last],
        saturated=saturated_at is not None,
        saturation_index=saturated_at,
        final_density=V if isinstance(V, Density) else None,
    )
    if confirm:
        out.confirmed_events = confirm_blowups(params, init, config, common, out)
    return out


def confirm_blowups(
    params: ModelParams,
    init: InitialCondition,
    config: SolverConfig,
    common: Forcing,
    coarse: SolverOutput,
) -> list[BlowupEvent]:
    """Keep the candidates that persist when ``dt`` is halved.

    The refined run uses the Brownian-bridge (or linearly interpolated)
    refinement of the same forcing, so both runs see the same common path at
    every coarse grid time.
    """
    if not coarse.blowup_events:
        return []
    w = config.confirm_window
    fine_cfg = replace(config, time=config.time.refined(2), snapshot_every=0)
    stop = 2 * (coarse.blowup_events[-1].time_index + w) + 1
    fine = run_density_solver(params, init, fine_cfg, common.refined(), stop_index=stop)
    fine_idx = np.array([e.time_index for e in fine.blowup_events], dtype=float)
    kept = []
    for e in coarse.blowup_events:
        if fine_idx.size and np.min(np.abs(fine_idx / 2.0 - e.time_index)) <= w:
            kept.append(e)
    return kept
