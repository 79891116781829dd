"""Grids, densities, loss paths, model coefficients and quadrature helpers.

Every type here is an immutable value. Densities live on a uniform grid
``x_j = j * dx`` over ``[0, u]`` and are integrated with the trapezoid rule;
shifts re-interpolate linearly onto the same grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

__all__ = [
    "ValidationError",
    "DomainError",
    "SaturationError",
    "GridMismatchError",
    "TimeGrid",
    "SpaceGrid",
    "Density",
    "Jump",
    "LossPath",
    "Drift",
    "LossTransform",
    "InitialCondition",
    "ModelParams",
    "cdf",
    "cumulative_mass",
    "total_mass",
    "shift_density",
    "eval_transform",
    "DEFAULT_L_MAX",
]

DEFAULT_L_MAX = 1.0 - 1e-6


class ValidationError(ValueError):
    """Raised when parameters violate the structural conditions of the model."""


class DomainError(ValueError):
    """Raised when a loss transform is evaluated outside its domain."""


class SaturationError(RuntimeError):
    """Raised when a singular loss transform drives the loss up to ``L_max``."""

    def __init__(self, message: str, time_index: int | None = None):
        super().__init__(message)
        self.time_index = time_index


class GridMismatchError(ValueError):
    pass


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.flags.writeable = False
    return arr


# ---------------------------------------------------------------------------
# Grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid ``t_k = k * dt`` for ``k = 0, ..., n_steps``."""

    dt: float
    n_steps: int

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValidationError(f"dt must be positive, got {self.dt}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValidationError(f"n_steps must be an integer >= 1, got {self.n_steps}")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @classmethod
    def from_horizon(cls, t_final: float, dt: float) -> "TimeGrid":
        if not dt > 0:
            raise ValidationError(f"dt must be positive, got {dt}")
        n = int(round(t_final / dt))
        if n < 1 or abs(n * dt - t_final) > 1e-9 * max(1.0, t_final):
            raise ValidationError(f"t_final={t_final} is not a positive multiple of dt={dt}")
        return cls(dt, n)

    @property
    def horizon(self) -> float:
        return self.n_steps * self.dt

    def t(self, k: int) -> float:
        return k * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    def refined(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.dt / factor, self.n_steps * factor)


@dataclass(frozen=True)
class SpaceGrid:
    """Uniform spatial grid on ``[0, upper]`` with nodes ``x_j = j * dx``."""

    dx: float
    upper: float

    def __post_init__(self):
        if not (self.dx > 0 and math.isfinite(self.dx)):
            raise ValidationError(f"dx must be positive, got {self.dx}")
        if not self.upper > 0:
            raise ValidationError(f"upper truncation level must be positive, got {self.upper}")
        if self.dx > self.upper:
            raise ValidationError("dx must not exceed the truncation level")

    @property
    def n_points(self) -> int:
        # tolerate representation error in upper/dx (e.g. 8 / 1e-3)
        return int(math.floor(self.upper / self.dx + 1e-9)) + 1

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_points) * self.dx

    @property
    def last_node(self) -> float:
        return (self.n_points - 1) * self.dx

    def weights(self) -> np.ndarray:
        """Trapezoid weights on the nodes."""
        w = np.full(self.n_points, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return w


# ---------------------------------------------------------------------------
# Densities
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Density:
    """Tabulated sub-probability density on a :class:`SpaceGrid`.

    ``leaked_mass`` is the mass that has left through the upper truncation
    level; it is carried alongside rather than folded into the loss.
    """

    grid: SpaceGrid
    values: np.ndarray
    leaked_mass: float = 0.0

    def __post_init__(self):
        values = _frozen(self.values)
        if values.shape != (self.grid.n_points,):
            raise ValidationError(
                f"density has {values.size} values but grid has {self.grid.n_points} nodes"
            )
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValidationError("density values must be finite and nonnegative")
        if self.leaked_mass < 0:
            raise ValidationError("leaked_mass must be nonnegative")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: SpaceGrid, fn: Callable[[np.ndarray], np.ndarray]) -> "Density":
        return cls(grid, np.clip(np.asarray(fn(grid.nodes), dtype=float), 0.0, None))

    @classmethod
    def zeros(cls, grid: SpaceGrid) -> "Density":
        return cls(grid, np.zeros(grid.n_points))

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    def sup_norm(self) -> float:
        return float(self.values.max(initial=0.0))

    def to_csv(self, path) -> None:
        from .io import write_density_csv

        write_density_csv(self, path)


def cumulative_mass(density: Density) -> np.ndarray:
    """Trapezoid integral of the density from 0 up to each node."""
    v = density.values
    out = np.empty_like(v)
    out[0] = 0.0
    np.cumsum(0.5 * density.grid.dx * (v[1:] + v[:-1]), out=out[1:])
    return out


def total_mass(density: Density) -> float:
    """Trapezoid integral over the whole grid."""
    v = density.values
    if v.size < 2:
        return 0.0
    return float(density.grid.dx * (v.sum() - 0.5 * (v[0] + v[-1])))


def _cdf_from_cumulative(values, cum, dx: float, n: int, x: float) -> float:
    # exact integral of the piecewise-linear interpolant
    if x <= 0.0:
        return 0.0
    s = x / dx
    j = int(s)
    if j >= n - 1:
        return float(cum[n - 1])
    frac = s - j
    v0 = values[j]
    vx = v0 + frac * (values[j + 1] - v0)
    return float(cum[j] + 0.5 * frac * dx * (v0 + vx))


def cdf(density: Density, x: float) -> float:
    """Mass of ``density`` on ``[0, min(x, u)]``.

    Between nodes the density is read as its linear interpolant, so the
    result is continuous and nondecreasing in ``x`` and agrees with
    :func:`total_mass` at the top of the grid.
    """
    cum = cumulative_mass(density)
    return _cdf_from_cumulative(density.values, cum, density.grid.dx, density.grid.n_points, x)


class CdfEvaluator:
    """Repeated cdf evaluations against one density (used in fixed-point loops)."""

    __slots__ = ("_values", "_cum", "_dx", "_n", "total")

    def __init__(self, density: Density):
        self._values = density.values.tolist()
        self._cum = cumulative_mass(density).tolist()
        self._dx = density.grid.dx
        self._n = density.grid.n_points
        self.total = self._cum[-1]

    def __call__(self, x: float) -> float:
        return _cdf_from_cumulative(self._values, self._cum, self._dx, self._n, x)


def shift_density(density: Density, delta: float) -> Density:
    """Translate the density towards the origin by ``delta >= 0``.

    New values are ``V(x + delta)`` read off the linear interpolant; mass
    pushed below zero is dropped and nothing is brought in from above ``u``.
    """
    if delta < 0:
        raise ValueError(f"shift must be nonnegative, got {delta}")
    if delta == 0:
        return density
    x = density.grid.nodes
    shifted = np.interp(x + delta, x, density.values, right=0.0)
    return Density(density.grid, shifted, density.leaked_mass)


# ---------------------------------------------------------------------------
# Loss paths
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Jump:
    time_index: int
    size: float
    cause: str  # "diffusion-step" or "cascade"


@dataclass(frozen=True, eq=False)
class LossPath:
    """Nondecreasing record of the loss ``L`` on a time grid."""

    grid: TimeGrid
    values: np.ndarray
    jumps: tuple[Jump, ...] = ()

    def __post_init__(self):
        values = _frozen(self.values)
        if values.ndim != 1 or values.size > self.grid.n_steps + 1:
            raise ValidationError("loss values must be one-dimensional and fit the time grid")
        if values.size and (values.min() < -1e-12 or values.max() > 1 + 1e-9):
            raise ValidationError("loss values must lie in [0, 1]")
        if np.any(np.diff(values) < -1e-12):
            raise ValidationError("loss path must be nondecreasing")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "jumps", tuple(self.jumps))

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.values.size)

    @property
    def times(self) -> np.ndarray:
        return self.indices * self.grid.dt

    @property
    def final(self) -> float:
        return float(self.values[-1])

    def at_time(self, t: float) -> float:
        k = min(int(math.floor(t / self.grid.dt + 1e-9)), self.values.size - 1)
        return float(self.values[k])

    @classmethod
    def from_increments(cls, grid: TimeGrid, increments, causes=None) -> "LossPath":
        inc = np.asarray(increments, dtype=float)
        values = np.concatenate([[0.0], np.cumsum(inc)])
        jumps = []
        for k, d in enumerate(inc):
            if d > 0:
                cause = causes[k] if causes is not None else "diffusion-step"
                jumps.append(Jump(k + 1, float(d), cause))
        return cls(grid, values, tuple(jumps))

    def to_csv(self, path) -> None:
        from .io import write_loss_csv

        write_loss_csv(self, path)


# ---------------------------------------------------------------------------
# Model coefficients
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Drift:
    """Spatial drift ``b(t, x)``.

    Built-in kinds are ``zero``, ``constant`` (b = c), ``linear``
    (b = a x + c) and ``ou`` (b = kappa (theta - x)). ``custom`` wraps a
    vectorised callable together with its declared linear-growth constant.
    """

    kind: str = "zero"
    params: tuple[float, ...] = ()
    fn: Callable | None = field(default=None, compare=False, repr=False)
    growth: float | None = None

    @classmethod
    def zero(cls) -> "Drift":
        return cls("zero")

    @classmethod
    def constant(cls, c: float) -> "Drift":
        return cls("constant", (float(c),))

    @classmethod
    def linear(cls, a: float, c: float) -> "Drift":
        return cls("linear", (float(a), float(c)))

    @classmethod
    def ou(cls, kappa: float, theta: float) -> "Drift":
        return cls("ou", (float(kappa), float(theta)))

    @classmethod
    def custom(cls, fn: Callable, growth: float) -> "Drift":
        return cls("custom", (), fn, float(growth))

    @classmethod
    def parse(cls, spec: str) -> "Drift":
        """Parse ``zero``, ``const:c``, ``linear:a:c`` or ``ou:kappa:theta``."""
        parts = spec.strip().split(":")
        name, args = parts[0].lower(), parts[1:]
        try:
            vals = [float(a) for a in args]
        except ValueError as exc:
            raise ValidationError(f"bad drift spec {spec!r}") from exc
        arity = {"zero": 0, "const": 1, "constant": 1, "linear": 2, "ou": 2}
        if name not in arity or len(vals) != arity[name]:
            raise ValidationError(f"bad drift spec {spec!r}; expected zero, const:c, linear:a:c or ou:kappa:theta")
        if name == "zero":
            return cls.zero()
        if name in ("const", "constant"):
            return cls.constant(*vals)
        if name == "linear":
            return cls.linear(*vals)
        return cls.ou(*vals)

    def spec(self) -> str:
        if self.kind == "custom":
            raise ValidationError("custom drifts have no text form")
        if self.kind == "zero":
            return "zero"
        name = "const" if self.kind == "constant" else self.kind
        return ":".join([name] + [repr(p) for p in self.params])

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or (self.kind == "constant" and self.params[0] == 0.0)

    @property
    def state_independent(self) -> bool:
        return self.kind in ("zero", "constant") or (
            self.kind == "linear" and self.params[0] == 0.0
        ) or (self.kind == "ou" and self.params[0] == 0.0)

    def growth_constant(self) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "constant":
            return abs(self.params[0])
        if self.kind == "linear":
            return max(abs(self.params[0]), abs(self.params[1]))
        if self.kind == "ou":
            k, th = self.params
            return max(abs(k), abs(k * th))
        return float(self.growth)

    def __call__(self, t: float, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(x)
        if self.kind == "constant":
            return np.full_like(x, self.params[0])
        if self.kind == "linear":
            a, c = self.params
            return a * x + c
        if self.kind == "ou":
            k, th = self.params
            return k * (th - x)
        return np.asarray(self.fn(t, x), dtype=float)


class LossTransform:
    """Loss transform ``f`` with antiderivative ``F(x) = int_0^x f``.

    Variants: ``linear`` (x), ``neglog`` (-log(1 - x)), ``reciprocal``
    ((1 - x)^-1) and ``tabulated`` (piecewise linear through given points
    on [0, 1)).
    """

    KINDS = ("linear", "neglog", "reciprocal", "tabulated")

    def __init__(self, kind: str = "linear", table_x=None, table_f=None):
        kind = kind.lower()
        if kind not in self.KINDS:
            raise ValidationError(f"unknown loss transform {kind!r}; expected one of {self.KINDS}")
        self.kind = kind
        self.table_x = self.table_f = self._table_cum = None
        if kind == "tabulated":
            tx = np.asarray(table_x, dtype=float)
            tf = np.asarray(table_f, dtype=float)
            if tx.ndim != 1 or tx.shape != tf.shape or tx.size < 2:
                raise ValidationError("tabulated transform needs matching 1-d tables of length >= 2")
            if tx[0] != 0.0 or tx[-1] > 1.0 or np.any(np.diff(tx) <= 0):
                raise ValidationError("tabulated transform nodes must start at 0, increase, and stay in [0, 1]")
            if not np.all(np.isfinite(tf)):
                raise ValidationError("tabulated transform values must be finite")
            self.table_x, self.table_f = _frozen(tx), _frozen(tf)
            self._table_cum = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(tx) * (tf[1:] + tf[:-1]))])

    @classmethod
    def linear(cls):
        return cls("linear")

    @classmethod
    def neglog(cls):
        return cls("neglog")

    @classmethod
    def reciprocal(cls):
        return cls("reciprocal")

    @classmethod
    def tabulated(cls, x, f):
        return cls("tabulated", x, f)

    def __repr__(self):
        return f"LossTransform({self.kind!r})"

    def __eq__(self, other):
        if not isinstance(other, LossTransform) or other.kind != self.kind:
            return False
        if self.kind != "tabulated":
            return True
        return np.array_equal(self.table_x, other.table_x) and np.array_equal(self.table_f, other.table_f)

    def __hash__(self):
        return hash(self.kind)

    @property
    def singular(self) -> bool:
        return self.kind in ("neglog", "reciprocal")

    @property
    def integral_diverges(self) -> bool:
        """True when ``int_0^1 f`` is infinite."""
        return self.kind == "reciprocal"

    def f(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "linear":
            out = x.copy()
        elif self.kind == "neglog":
            out = -np.log1p(-x)
        elif self.kind == "reciprocal":
            out = 1.0 / (1.0 - x)
        else:
            out = np.interp(x, self.table_x, self.table_f)
        return out if out.ndim else float(out)

    def antiderivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "linear":
            out = 0.5 * x * x
        elif self.kind == "neglog":
            one_m = 1.0 - x
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.where(one_m > 0, one_m * np.log(np.where(one_m > 0, one_m, 1.0)), 0.0) + x
        elif self.kind == "reciprocal":
            out = -np.log1p(-x)
        else:
            tx, tf = self.table_x, self.table_f
            j = np.clip(np.searchsorted(tx, x, side="right") - 1, 0, tx.size - 2)
            h = x - tx[j]
            slope = (tf[j + 1] - tf[j]) / (tx[j + 1] - tx[j])
            out = self._table_cum[j] + h * tf[j] + 0.5 * slope * h * h
        return out if out.ndim else float(out)

    def lower_bound(self) -> float:
        if self.kind == "tabulated":
            return float(self.table_f.min())
        return float(self.f(0.0))


def eval_transform(transform: LossTransform, L: float, L_max: float = DEFAULT_L_MAX) -> float:
    """Evaluate ``f(L)``; singular transforms refuse ``L >= L_max``."""
    if L < 0:
        raise DomainError(f"loss must be nonnegative, got {L}")
    if transform.singular and L >= L_max:
        raise DomainError(f"{transform.kind} transform is singular at 1; L={L} >= L_max={L_max}")
    if transform.kind == "tabulated" and L > transform.table_x[-1]:
        raise DomainError(f"tabulated transform defined up to {transform.table_x[-1]}, got L={L}")
    if L > 1:
        raise DomainError(f"loss must not exceed 1, got {L}")
    return float(transform.f(L))


# ---------------------------------------------------------------------------
# Initial conditions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class InitialCondition:
    """Law of the starting position, supported in ``(0, inf)``.

    ``kind`` is one of ``dirac`` (x0), ``uniform`` (a, b),
    ``tgauss`` (mean, sd; a Gaussian conditioned on x > 0) or ``tabulated``
    (nodes, values).
    """

    kind: str
    params: tuple[float, ...] = ()
    table_x: np.ndarray | None = None
    table_v: np.ndarray | None = None

    def __post_init__(self):
        k = self.kind
        p = self.params
        if k == "dirac":
            if len(p) != 1 or not p[0] > 0:
                raise ValidationError(f"Dirac initial condition needs x0 > 0, got {p}")
        elif k == "uniform":
            if len(p) != 2 or not 0 < p[0] < p[1]:
                raise ValidationError(f"uniform initial condition needs 0 < a < b, got {p}")
        elif k == "tgauss":
            if len(p) != 2 or not p[1] > 0:
                raise ValidationError(f"truncated Gaussian needs sd > 0, got {p}")
        elif k == "tabulated":
            tx = np.asarray(self.table_x, dtype=float)
            tv = np.asarray(self.table_v, dtype=float)
            if tx.ndim != 1 or tx.shape != tv.shape or tx.size < 2 or np.any(np.diff(tx) <= 0):
                raise ValidationError("tabulated initial density needs increasing nodes and matching values")
            if np.any(tv < 0) or not np.all(np.isfinite(tv)):
                raise ValidationError("tabulated initial density must be finite and nonnegative")
            if np.any(tv[tx <= 0] > 0):
                raise ValidationError("initial condition must put no mass on (-inf, 0]")
            mass = np.trapezoid(tv, tx)
            if not mass > 0:
                raise ValidationError("tabulated initial density has zero mass")
            object.__setattr__(self, "table_x", _frozen(tx))
            object.__setattr__(self, "table_v", _frozen(tv / mass))
        else:
            raise ValidationError(f"unknown initial condition kind {k!r}")
        object.__setattr__(self, "params", tuple(float(v) for v in p))

    @classmethod
    def dirac(cls, x0: float) -> "InitialCondition":
        return cls("dirac", (x0,))

    @classmethod
    def uniform(cls, a: float, b: float) -> "InitialCondition":
        return cls("uniform", (a, b))

    @classmethod
    def truncated_gaussian(cls, mean: float, sd: float) -> "InitialCondition":
        return cls("tgauss", (mean, sd))

    @classmethod
    def tabulated(cls, x, values) -> "InitialCondition":
        return cls("tabulated", (), np.asarray(x, float), np.asarray(values, float))

    @classmethod
    def parse(cls, spec: str) -> "InitialCondition":
        """Parse ``dirac:x0``, ``uniform:a:b``, ``tgauss:mean:sd`` or ``table:<csv path>``."""
        name, _, rest = spec.strip().partition(":")
        name = name.lower()
        if name in ("table", "tabulated"):
            from .io import read_density_table

            x, v = read_density_table(rest)
            return cls.tabulated(x, v)
        try:
            vals = tuple(float(a) for a in rest.split(":")) if rest else ()
        except ValueError as exc:
            raise ValidationError(f"bad init spec {spec!r}") from exc
        if name not in ("dirac", "uniform", "tgauss"):
            raise ValidationError(f"bad init spec {spec!r}; expected dirac:x0, uniform:a:b, tgauss:mean:sd or table:path")
        return cls(name, vals)

    def spec(self) -> str:
        if self.kind == "tabulated":
            raise ValidationError("tabulated initial conditions have no inline text form")
        return ":".join([self.kind] + [repr(p) for p in self.params])

    @property
    def is_dirac(self) -> bool:
        return self.kind == "dirac"

    def support(self) -> tuple[float, float]:
        """Closed hull of the support."""
        k, p = self.kind, self.params
        if k == "dirac":
            return p[0], p[0]
        if k == "uniform":
            return p
        if k == "tgauss":
            return 0.0, math.inf
        nz = np.nonzero(self.table_v > 0)[0]
        lo = self.table_x[max(nz[0] - 1, 0)]
        hi = self.table_x[min(nz[-1] + 1, self.table_x.size - 1)]
        return float(lo), float(hi)

    def mean(self) -> float:
        k, p = self.kind, self.params
        if k == "dirac":
            return p[0]
        if k == "uniform":
            return 0.5 * (p[0] + p[1])
        if k == "tgauss":
            m, s = p
            a = -m / s
            # E[X | X > 0] for X ~ N(m, s^2)
            return m + s * math.exp(-0.5 * a * a) / math.sqrt(2 * math.pi) / float(ndtr(-a))
        return float(np.trapezoid(self.table_x * self.table_v, self.table_x))

    def sup_density(self) -> float:
        """Supremum of the initial density; ``inf`` for a Dirac mass."""
        k, p = self.kind, self.params
        if k == "dirac":
            return math.inf
        if k == "uniform":
            return 1.0 / (p[1] - p[0])
        if k == "tgauss":
            m, s = p
            peak = 1.0 / (s * math.sqrt(2 * math.pi)) * math.exp(-0.5 * (min(m, 0.0) / s) ** 2)
            return peak / float(ndtr(m / s))
        return float(self.table_v.max())

    def pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        k, p = self.kind, self.params
        if k == "dirac":
            raise ValidationError("a Dirac mass has no density")
        if k == "uniform":
            return np.where((x >= p[0]) & (x <= p[1]), 1.0 / (p[1] - p[0]), 0.0)
        if k == "tgauss":
            m, s = p
            z = (x - m) / s
            dens = np.exp(-0.5 * z * z) / (s * math.sqrt(2 * math.pi)) / float(ndtr(m / s))
            return np.where(x > 0, dens, 0.0)
        return np.interp(x, self.table_x, self.table_v, left=0.0, right=0.0)

    def density_on(self, grid: SpaceGrid) -> Density:
        """Tabulate on the grid, renormalised to unit trapezoid mass."""
        if self.is_dirac:
            raise ValidationError("Dirac initial conditions are kept symbolic")
        d = Density(grid, self.pdf(grid.nodes))
        m = total_mass(d)
        if not m > 0:
            raise ValidationError("initial density has no mass on the grid; check dx and upper")
        return Density(grid, d.values / m)

    def ppf(self, u) -> np.ndarray:
        """Inverse distribution function, used for sampling."""
        u = np.asarray(u, dtype=float)
        k, p = self.kind, self.params
        if k == "dirac":
            return np.full_like(u, p[0])
        if k == "uniform":
            return p[0] + (p[1] - p[0]) * u
        if k == "tgauss":
            m, s = p
            lo = float(ndtr(-m / s))
            return m + s * ndtri(lo + (1.0 - lo) * u)
        tx, tv = self.table_x, self.table_v
        cum = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(tx) * (tv[1:] + tv[:-1]))])
        cum /= cum[-1]
        return np.interp(u, cum, tx)

    def shifted(self, c: float) -> "InitialCondition":
        """Same law translated by ``c`` (must stay inside (0, inf))."""
        k, p = self.kind, self.params
        if k == "dirac":
            return InitialCondition.dirac(p[0] + c)
        if k == "uniform":
            return InitialCondition.uniform(p[0] + c, p[1] + c)
        if k == "tabulated":
            return InitialCondition.tabulated(self.table_x + c, self.table_v)
        raise ValidationError("truncated Gaussian initial conditions cannot be shifted exactly")


# ---------------------------------------------------------------------------
# Model parameters
# ---------------------------------------------------------------------------

TimeFunction = float | Callable[[float], float]


def _time_values(fn: TimeFunction, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if callable(fn):
        return np.asarray(np.vectorize(fn, otypes=[float])(t), dtype=float)
    return np.full_like(t, float(fn))


@dataclass(frozen=True)
class ModelParams:
    """Coefficients of the particle system and its mean-field limit.

    ``rho`` and ``sigma`` are either constants or callables of time. The
    structural bounds ``0 <= rho <= 1 - eps`` and ``eps <= sigma <= 1/eps``
    are checked at construction for constants and by :meth:`validate` on a
    time grid otherwise.
    """

    alpha: float
    rho: TimeFunction = 0.0
    sigma: TimeFunction = 1.0
    drift: Drift = field(default_factory=Drift.zero)
    transform: LossTransform = field(default_factory=LossTransform.linear)
    eps: float = 1e-3
    L_max: float = DEFAULT_L_MAX

    def __post_init__(self):
        if not (isinstance(self.alpha, (int, float)) and math.isfinite(self.alpha)) or self.alpha < 0:
            raise ValidationError(f"alpha must be a finite nonnegative number, got {self.alpha}")
        if not 0 < self.eps < 1:
            raise ValidationError(f"eps must lie in (0, 1), got {self.eps}")
        if not 0 < self.L_max <= 1:
            raise ValidationError(f"L_max must lie in (0, 1], got {self.L_max}")
        if isinstance(self.drift, str):
            object.__setattr__(self, "drift", Drift.parse(self.drift))
        if isinstance(self.transform, str):
            object.__setattr__(self, "transform", LossTransform(self.transform))
        if self.transform.lower_bound() == -math.inf:
            raise ValidationError("loss transform must be bounded below")
        if not callable(self.rho):
            self._check_rho(np.array([float(self.rho)]))
        if not callable(self.sigma):
            self._check_sigma(np.array([float(self.sigma)]))

    def _check_rho(self, r: np.ndarray):
        bad = ~((r >= 0) & (r <= 1 - self.eps))
        if np.any(bad):
            raise ValidationError(
                f"rho={float(r[bad][0])!r} violates the non-degeneracy bound 0 <= rho <= 1 - eps (eps={self.eps})"
            )

    def _check_sigma(self, s: np.ndarray):
        bad = ~((s >= self.eps) & (s <= 1 / self.eps))
        if np.any(bad):
            raise ValidationError(
                f"sigma={float(s[bad][0])!r} violates the bound eps <= sigma <= 1/eps (eps={self.eps})"
            )

    def rho_at(self, t):
        return _time_values(self.rho, t) if not np.isscalar(t) else float(_time_values(self.rho, t))

    def sigma_at(self, t):
        return _time_values(self.sigma, t) if not np.isscalar(t) else float(_time_values(self.sigma, t))

    @property
    def rho_is_zero(self) -> bool:
        return not callable(self.rho) and float(self.rho) == 0.0

    def validate(self, grid: TimeGrid, probe_x: Sequence[float] | None = None) -> None:
        """Check the structural bounds at every grid time."""
        t = grid.times
        self._check_rho(_time_values(self.rho, t))
        self._check_sigma(_time_values(self.sigma, t))
        if self.drift.kind == "custom":
            xs = np.asarray(probe_x if probe_x is not None else np.linspace(-50, 50, 201))
            C = self.drift.growth_constant()
            for tk in t[:: max(1, t.size // 50)]:
                b = self.drift(float(tk), xs)
                if not np.all(np.isfinite(b)) or np.any(np.abs(b) > C * (1 + np.abs(xs)) + 1e-12):
                    raise ValidationError(
                        f"drift violates the linear growth bound |b(t,x)| <= {C}(1+|x|) at t={tk}"
                    )

    def diffusion_variance(self, t: float, dt: float) -> float:
        """Idiosyncratic variance over one step, ``sigma^2 (1 - rho^2) dt``."""
        s = self.sigma_at(t)
        r = self.rho_at(t)
        return s * s * (1.0 - r * r) * dt

    def shift(self, L: float, dL: float) -> float:
        """Downward displacement ``alpha (f(L + dL) - f(L))`` caused by new losses."""
        if self.alpha == 0 or dL <= 0:
            return 0.0
        tr = self.transform
        if tr.kind == "linear":
            return self.alpha * dL
        hi = L + dL
        if tr.singular and hi >= self.L_max:
            raise SaturationError(f"{tr.kind} transform saturated: loss {hi} >= L_max={self.L_max}")
        return self.alpha * (float(tr.f(hi)) - float(tr.f(L)))
