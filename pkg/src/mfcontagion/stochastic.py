"""Seeded Brownian increments from a stateless counter-based generator.

Draws are a pure function of ``(seed, stream, index)`` through
Philox-4x32-10, so any worker can regenerate any slice of any stream.
Stream 0 carries the common noise; particle ``i`` reads stream ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .core import ModelParams, TimeGrid, ValidationError

__all__ = [
    "philox4x32",
    "standard_normals",
    "uniforms",
    "NoisePath",
    "Forcing",
    "generate_noise",
    "idiosyncratic_increments",
    "forcing_value",
    "derive_seed",
    "COMMON_STREAM",
]

COMMON_STREAM = 0
# streams reserved for Brownian-bridge refinement and initial sampling
BRIDGE_STREAM_BASE = 1 << 62
INIT_INDEX = 1 << 62

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)


def philox4x32(counter, key, rounds: int = 10):
    """Philox-4x32 block function, vectorised over counters.

    ``counter`` is a 4-tuple of uint32 arrays (broadcastable), ``key`` a pair
    of ints. Returns four uint64 arrays holding 32-bit words.
    """
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) & _MASK32 for c in counter)
    k0, k1 = int(key[0]) & 0xFFFFFFFF, int(key[1]) & 0xFFFFFFFF
    for r in range(rounds):
        p0 = _M0 * c0
        p1 = _M1 * c2
        kk0 = np.uint64(k0)
        kk1 = np.uint64(k1)
        c0, c1, c2, c3 = (
            (p1 >> _SHIFT32) ^ c1 ^ kk0,
            p1 & _MASK32,
            (p0 >> _SHIFT32) ^ c3 ^ kk1,
            p0 & _MASK32,
        )
        k0 = (k0 + _W0) & 0xFFFFFFFF
        k1 = (k1 + _W1) & 0xFFFFFFFF
    return c0, c1, c2, c3


def _split64(v):
    v = np.asarray(v, dtype=np.uint64)
    return v & _MASK32, v >> _SHIFT32


def uniforms(seed: int, stream, index) -> np.ndarray:
    """Uniform draws on the open interval (0, 1), 53-bit resolution."""
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    s_lo, s_hi = _split64(stream)
    i_lo, i_hi = _split64(index)
    w0, w1, _, _ = philox4x32((i_lo, i_hi, s_lo, s_hi), (seed & 0xFFFFFFFF, seed >> 32))
    a = (w0 >> np.uint64(5)).astype(np.float64)
    b = (w1 >> np.uint64(6)).astype(np.float64)
    return (a * 67108864.0 + b + 0.5) / 9007199254740992.0


def standard_normals(seed: int, stream, index) -> np.ndarray:
    """Standard normal draws keyed by ``(seed, stream, index)``."""
    return ndtri(uniforms(seed, stream, index))


def derive_seed(base_seed: int, path_index: int) -> int:
    """Independent 64-bit seed for Monte Carlo replicate ``path_index``."""
    state = np.random.SeedSequence([int(base_seed), int(path_index)]).generate_state(1, np.uint64)
    return int(state[0])


@dataclass(frozen=True, eq=False)
class NoisePath:
    """Increments of a Brownian motion on a time grid.

    ``level`` counts Brownian-bridge refinements applied to the base path
    drawn from ``seed``; level 0 is the raw i.i.d. N(0, dt) sequence.
    """

    increments: np.ndarray
    seed: int
    grid: TimeGrid
    stream: int = COMMON_STREAM
    level: int = 0

    def __post_init__(self):
        inc = np.array(self.increments, dtype=float)
        if inc.shape != (self.grid.n_steps,):
            raise ValidationError(f"expected {self.grid.n_steps} increments, got {inc.shape}")
        inc.flags.writeable = False
        object.__setattr__(self, "increments", inc)

    @property
    def path(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.increments)])

    def refined(self) -> "NoisePath":
        """Halve the step by Brownian-bridge interpolation.

        The refined path agrees with this one at every original grid time.
        """
        n = self.grid.n_steps
        z = standard_normals(self.seed, BRIDGE_STREAM_BASE + self.stream * 64 + self.level, np.arange(n))
        half = 0.5 * np.sqrt(self.grid.dt) * z
        fine = np.empty(2 * n)
        fine[0::2] = 0.5 * self.increments + half
        fine[1::2] = 0.5 * self.increments - half
        return NoisePath(fine, self.seed, self.grid.refined(2), self.stream, self.level + 1)

    def to_csv(self, path) -> None:
        from .io import write_noise_csv

        write_noise_csv(self, path)


def generate_noise(seed: int, grid: TimeGrid, stream: int = COMMON_STREAM) -> NoisePath:
    """N(0, dt) increments for ``stream`` under ``seed``."""
    z = standard_normals(seed, stream, np.arange(grid.n_steps, dtype=np.uint64))
    return NoisePath(np.sqrt(grid.dt) * z, int(seed), grid, stream)


def idiosyncratic_increments(seed: int, k: int, n_particles: int, dt: float) -> np.ndarray:
    """Step-``k`` increments for particles ``1..N`` (streams ``1..N``)."""
    streams = np.arange(1, n_particles + 1, dtype=np.uint64)
    return np.sqrt(dt) * standard_normals(seed, streams, np.uint64(k))


@dataclass(frozen=True, eq=False)
class Forcing:
    """Common forcing: a scaled Brownian path or a tabulated deterministic path.

    For ``brownian`` the step displacement is ``sigma(t_k) rho(t_k) dB0_k``;
    for ``deterministic`` it is ``path[k+1] - path[k]``.
    """

    kind: str
    noise: NoisePath | None = None
    path: np.ndarray | None = None
    grid: TimeGrid | None = None

    def __post_init__(self):
        if self.kind == "brownian":
            if self.noise is None:
                raise ValidationError("brownian forcing needs a NoisePath")
            object.__setattr__(self, "grid", self.noise.grid)
        elif self.kind == "deterministic":
            p = np.array(self.path, dtype=float)
            if self.grid is None or p.shape != (self.grid.n_steps + 1,):
                raise ValidationError("deterministic forcing needs one value per grid node")
            if p[0] != 0.0:
                raise ValidationError("deterministic forcing path must start at 0")
            p.flags.writeable = False
            object.__setattr__(self, "path", p)
        else:
            raise ValidationError(f"unknown forcing kind {self.kind!r}")

    @classmethod
    def brownian(cls, noise: NoisePath) -> "Forcing":
        return cls("brownian", noise=noise)

    @classmethod
    def deterministic(cls, path, grid: TimeGrid) -> "Forcing":
        return cls("deterministic", path=path, grid=grid)

    @classmethod
    def from_function(cls, fn, grid: TimeGrid) -> "Forcing":
        vals = np.array([fn(t) for t in grid.times], dtype=float)
        return cls.deterministic(vals - vals[0], grid)

    @classmethod
    def none(cls, grid: TimeGrid) -> "Forcing":
        return cls.deterministic(np.zeros(grid.n_steps + 1), grid)

    def refined(self) -> "Forcing":
        if self.kind == "brownian":
            return Forcing.brownian(self.noise.refined())
        fine = np.empty(2 * self.path.size - 1)
        fine[0::2] = self.path
        fine[1::2] = 0.5 * (self.path[1:] + self.path[:-1])
        return Forcing.deterministic(fine, self.grid.refined(2))

    def increments(self, params: ModelParams) -> np.ndarray:
        """All step displacements at once."""
        if self.kind == "deterministic":
            return np.diff(self.path)
        t = self.grid.times[:-1]
        return params.sigma_at(t) * params.rho_at(t) * self.noise.increments


def forcing_value(forcing: Forcing, params: ModelParams, k: int) -> float:
    """Common displacement over step ``k`` (from ``t_k`` to ``t_{k+1}``)."""
    n = forcing.grid.n_steps
    if not 0 <= k < n:
        raise IndexError(f"step index {k} out of range [0, {n})")
    if forcing.kind == "deterministic":
        return float(forcing.path[k + 1] - forcing.path[k])
    t = k * forcing.grid.dt
    return params.sigma_at(t) * params.rho_at(t) * float(forcing.noise.increments[k])
