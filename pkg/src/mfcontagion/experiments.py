"""Experiment drivers shared by the command line and the notebooks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import ExperimentConfig
from .core import Density, ValidationError
from .io import write_pgm, write_table_csv
from .particles import run_particle_system
from .solver import run_density_solver
from .stochastic import Forcing, derive_seed, generate_noise

__all__ = ["ConvergenceRow", "ConvergenceReport", "run_coupled", "emit_heatmap", "coupled_error"]


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    n_seeds: int
    median: float
    iqr: float


@dataclass(frozen=True)
class ConvergenceReport:
    rows: tuple[ConvergenceRow, ...]
    # raw sup-time errors, shape (len(rows), n_seeds)
    errors: np.ndarray = field(repr=False, default_factory=lambda: np.zeros((0, 0)))

    HEADER = ("n_particles", "n_seeds", "median_sup_error", "iqr")

    def medians(self) -> np.ndarray:
        return np.array([r.median for r in self.rows])

    def to_csv(self, path) -> None:
        write_table_csv(path, self.HEADER, [(r.n, r.n_seeds, r.median, r.iqr) for r in self.rows])


def coupled_error(l_particles: np.ndarray, l_solver: np.ndarray) -> float:
    """Sup over shared grid times of ``|L^N - L|``."""
    m = min(l_particles.size, l_solver.size)
    return float(np.max(np.abs(l_particles[:m] - l_solver[:m])))


def run_coupled(config: ExperimentConfig, n_list: Sequence[int], n_seeds: int, progress=None) -> ConvergenceReport:
    """Particle system against the density solver on shared common-noise paths.

    Replicate ``s`` draws its common path from ``derive_seed(common_seed, s)``
    and its idiosyncratic streams from ``derive_seed(idio_seed, s)``; the
    same :class:`NoisePath` drives the solver and every particle count.
    """
    if not n_list:
        raise ValidationError("n_list must contain at least one particle count")
    if n_seeds < 1:
        raise ValidationError("n_seeds must be >= 1")
    ns = sorted(int(n) for n in n_list)
    params = config.model()
    init = config.initial()
    scfg = config.solver_config()
    tg = scfg.time
    errs = np.zeros((len(ns), n_seeds))
    for s in range(n_seeds):
        noise = generate_noise(derive_seed(config.common_seed, s), tg)
        forcing = Forcing.brownian(noise)
        sol = run_density_solver(params, init, scfg, forcing)
        idio = derive_seed(config.idio_seed, s)
        for i, n in enumerate(ns):
            run = run_particle_system(params, init, tg, n, forcing, idio)
            errs[i, s] = coupled_error(run.loss.values, sol.loss.values)
        if progress is not None:
            progress(s, errs[:, s])
    rows = []
    for i, n in enumerate(ns):
        q1, med, q3 = np.percentile(errs[i], [25, 50, 75])
        rows.append(ConvergenceRow(n, n_seeds, float(med), float(q3 - q1)))
    return ConvergenceReport(tuple(rows), errs)


def emit_heatmap(snapshots: Sequence[tuple[int, Density] | Density | np.ndarray], path) -> None:
    """Write density snapshots as a P2 PGM, one column per snapshot."""
    cols = []
    for s in snapshots:
        if isinstance(s, tuple):
            s = s[1]
        cols.append(s.values if isinstance(s, Density) else np.asarray(s, dtype=float))
    write_pgm(cols, path)
