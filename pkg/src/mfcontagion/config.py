"""Flat ``key=value`` experiment configuration.

One key per line, ``#`` starts a comment, blank lines are ignored. Command
line flags are applied on top of the file. :meth:`ExperimentConfig.dump`
writes every key in a fixed order, so ``parse -> dump -> parse`` is a
fixed point.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields
from typing import Mapping

from .core import (
    Drift,
    InitialCondition,
    LossTransform,
    ModelParams,
    SpaceGrid,
    TimeGrid,
    ValidationError,
)
from .solver import SolverConfig

__all__ = ["ExperimentConfig", "parse_config", "MODES"]

MODES = ("particles", "density", "coupled", "blowup-prob", "verdict")
_TRANSFORMS = ("linear", "neglog", "reciprocal")


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _int(s: str) -> int:
    s = s.strip()
    try:
        return int(s, 0)
    except ValueError:
        v = float(s)  # accept 1e4
        if not v.is_integer():
            raise ValueError(f"not an integer: {s!r}") from None
        return int(v)


def _opt_str(s: str) -> str:
    return s.strip()


def _int_list(s: str) -> tuple[int, ...]:
    return tuple(int(float(p)) for p in s.replace(";", ",").split(",") if p.strip())


@dataclass(frozen=True)
class ExperimentConfig:
    """Every knob of a run; defaults reproduce the idiosyncratic baseline."""

    mode: str = "density"
    alpha: float = 1.0
    rho: float = 0.0
    sigma: float = 1.0
    drift: str = "zero"
    transform: str = "linear"
    eps: float = 1e-3
    l_max: float = 1.0 - 1e-6
    init: str = "dirac:1.0"
    dt: float = 1e-3
    t_final: float = 1.0
    dx: float = 1e-3
    upper: float = 8.0
    fp_eps: float = 1e-10
    fp_max_iter: int = 100_000
    jump_threshold: float = 0.05
    image_kernel: bool = False
    confirm: bool = False
    confirm_window: int = 10
    snapshot_every: int = 0
    n_particles: int = 10_000
    common_seed: int = 0
    idio_seed: int = 1
    paths: int = 100
    base_seed: int = 0
    n_list: tuple[int, ...] = (100, 1000, 10000)
    n_seeds: int = 20
    out_loss: str = ""
    out_density: str = ""
    out_noise: str = ""
    heatmap: str = ""

    # -- derived objects -------------------------------------------------

    def model(self) -> ModelParams:
        return ModelParams(
            alpha=self.alpha,
            rho=self.rho,
            sigma=self.sigma,
            drift=Drift.parse(self.drift),
            transform=LossTransform(self.transform),
            eps=self.eps,
            L_max=self.l_max,
        )

    def initial(self) -> InitialCondition:
        return InitialCondition.parse(self.init)

    def time_grid(self) -> TimeGrid:
        return TimeGrid.from_horizon(self.t_final, self.dt)

    def space_grid(self) -> SpaceGrid:
        return SpaceGrid(self.dx, self.upper)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            time=self.time_grid(),
            space=self.space_grid(),
            fp_eps=self.fp_eps,
            fp_max_iter=self.fp_max_iter,
            jump_threshold=self.jump_threshold,
            image_kernel=self.image_kernel,
            snapshot_every=self.snapshot_every,
            confirm_window=self.confirm_window,
        )

    def validate(self) -> "ExperimentConfig":
        """Raise :class:`ValidationError` naming the offending key."""
        if self.mode not in MODES:
            raise ValidationError(f"mode: {self.mode!r} is not one of {', '.join(MODES)}")
        if self.transform not in _TRANSFORMS:
            raise ValidationError(f"transform: {self.transform!r} is not one of {', '.join(_TRANSFORMS)}")
        if not (math.isfinite(self.alpha) and self.alpha >= 0):
            raise ValidationError(f"alpha: feedback strength must be >= 0, got {self.alpha}")
        for key in ("dt", "t_final", "dx", "upper"):
            v = getattr(self, key)
            if not (math.isfinite(v) and v > 0):
                raise ValidationError(f"{key}: must be a positive number, got {v}")
        for key in ("n_particles", "paths", "n_seeds"):
            if getattr(self, key) < 1:
                raise ValidationError(f"{key}: must be >= 1, got {getattr(self, key)}")
        if not self.n_list or min(self.n_list) < 1:
            raise ValidationError(f"n_list: need positive particle counts, got {self.n_list}")
        for key in ("common_seed", "idio_seed", "base_seed"):
            if not 0 <= getattr(self, key) < 2**64:
                raise ValidationError(f"{key}: seeds are unsigned 64-bit integers")
        try:
            self.model()
        except ValidationError as exc:
            key = "rho" if "rho" in str(exc) else "sigma" if "sigma" in str(exc) else "model"
            raise ValidationError(f"{key}: {exc}") from None
        except ValueError as exc:
            raise ValidationError(f"drift: {exc}") from None
        try:
            self.initial()
        except (ValidationError, ValueError, OSError) as exc:
            raise ValidationError(f"init: {exc}") from None
        try:
            self.solver_config()
        except ValidationError as exc:
            raise ValidationError(f"solver: {exc}") from None
        return self

    # -- text form -------------------------------------------------------

    def dump(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                s = "true" if v else "false"
            elif isinstance(v, float):
                s = repr(v)
            elif isinstance(v, tuple):
                s = ",".join(str(x) for x in v)
            else:
                s = str(v)
            lines.append(f"{f.name}={s}")
        return "\n".join(lines) + "\n"


_PARSERS = {}
for _f in fields(ExperimentConfig):
    _t = _f.type
    _PARSERS[_f.name] = {
        "float": float,
        "int": _int,
        "bool": _bool,
        "str": _opt_str,
        "tuple[int, ...]": _int_list,
    }[_t]


def _normalise_key(key: str) -> str:
    return key.strip().lower().replace("-", "_")


def parse_config(text: str = "", overrides: Mapping[str, object] | None = None) -> ExperimentConfig:
    """Parse ``key=value`` text, apply ``overrides`` and validate.

    Override values may be strings (as typed on a command line) or already
    typed Python values. ``None`` overrides are ignored.
    """
    values: dict[str, object] = {}

    def put(key: str, raw, where: str):
        k = _normalise_key(key)
        if k not in _PARSERS:
            raise ValidationError(f"unknown config key {key!r} ({where})")
        if isinstance(raw, str):
            try:
                values[k] = _PARSERS[k](raw)
            except ValueError as exc:
                raise ValidationError(f"{k}: cannot parse {raw!r} ({where}): {exc}") from None
        elif k == "n_list":
            values[k] = tuple(int(x) for x in raw)
        else:
            values[k] = raw

    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"line {lineno}: expected key=value, got {line!r}")
        key, raw = line.split("=", 1)
        put(key, raw.strip(), f"line {lineno}")
    for key, raw in (overrides or {}).items():
        if raw is not None:
            put(key, raw, "flag")
    floats = {f.name for f in fields(ExperimentConfig) if f.type == "float"}
    for k in floats & values.keys():
        values[k] = float(values[k])
    return dataclasses.replace(ExperimentConfig(), **values).validate()
