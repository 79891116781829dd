"""Command line front end.

Exit status: 0 on success, 1 for invalid input, 2 for runtime or numerical
failures (including a failed ``verify`` check). Tables go to stdout as CSV.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .analysis import curb_time, estimate_blowup_probability, static_verdict
from .config import ExperimentConfig, parse_config
from .core import DomainError, GridMismatchError, ValidationError
from .experiments import emit_heatmap, run_coupled
from .io import fmt
from .particles import run_particle_system
from .solver import run_density_solver
from .stochastic import Forcing, generate_noise

__all__ = ["main", "build_parser"]

log = logging.getLogger("mfcontagion")


class _ArgError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ArgError(f"{self.prog}: {message}")


def _model_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--config", help="key=value file; flags override it")
    g.add_argument("--alpha", type=float)
    g.add_argument("--rho", type=float)
    g.add_argument("--sigma", type=float)
    g.add_argument("--drift", help="zero | const:c | linear:a:c | ou:kappa:theta")
    g.add_argument("--transform", choices=["linear", "neglog", "reciprocal"])
    g.add_argument("--eps", type=float, help="structural bound epsilon")
    g.add_argument("--l-max", type=float, dest="l_max")
    g.add_argument("--init", help="dirac:x0 | uniform:a:b | tgauss:mean:sd | table:path")
    g.add_argument("--dt", type=float)
    g.add_argument("--t-final", type=float, dest="t_final")
    g.add_argument("--common-seed", type=int, dest="common_seed")
    g.add_argument("--idio-seed", type=int, dest="idio_seed")
    g.add_argument("--out-loss", dest="out_loss")
    g.add_argument("--snapshot-every", type=int, dest="snapshot_every")
    g.add_argument("-v", "--verbose", action="store_true")


def _solver_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("density solver")
    g.add_argument("--dx", type=float)
    g.add_argument("--upper", type=float)
    g.add_argument("--fp-eps", type=float, dest="fp_eps")
    g.add_argument("--fp-max-iter", type=int, dest="fp_max_iter")
    g.add_argument("--jump-threshold", type=float, dest="jump_threshold")
    g.add_argument("--image-kernel", action="store_const", const=True, dest="image_kernel")
    g.add_argument("--confirm", action="store_const", const=True, help="confirm blow-ups on a halved dt")
    g.add_argument("--confirm-window", type=int, dest="confirm_window")


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="mfcontagion", description="Particle and density simulations of mean-field contagion.")
    sub = top.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate-particles", help="finite particle system")
    _model_flags(p)
    p.add_argument("--n-particles", type=int, dest="n_particles")

    p = sub.add_parser("simulate-density", help="density solver")
    _model_flags(p)
    _solver_flags(p)
    p.add_argument("--heatmap", help="write a P2 PGM of the snapshots")
    p.add_argument("--out-density", dest="out_density", help="final density as CSV")
    p.add_argument("--out-noise", dest="out_noise", help="common increments as CSV")

    p = sub.add_parser("coupled", help="particle-vs-solver convergence table")
    _model_flags(p)
    _solver_flags(p)
    p.add_argument("--n-list", dest="n_list", help="comma-separated particle counts")
    p.add_argument("--n-seeds", type=int, dest="n_seeds")
    p.add_argument("--out", dest="out_report", help="also write the table to this file")

    p = sub.add_parser("estimate-blowup-prob", help="Monte Carlo blow-up frequency")
    _model_flags(p)
    _solver_flags(p)
    p.add_argument("--paths", type=int)
    p.add_argument("--base-seed", type=int, dest="base_seed")

    p = sub.add_parser("verdict", help="closed-form blow-up criteria")
    _model_flags(p)

    p = sub.add_parser("verify", help="run the quick invariant suites")
    p.add_argument("--check", action="append", help="run only this check (repeatable)")
    p.add_argument("-v", "--verbose", action="store_true")
    return top


_MODE = {
    "simulate-particles": "particles",
    "simulate-density": "density",
    "coupled": "coupled",
    "estimate-blowup-prob": "blowup-prob",
    "verdict": "verdict",
}
_NOT_CONFIG = {"command", "config", "verbose", "out_report", "check"}


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    text = ""
    if getattr(args, "config", None):
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ValidationError(f"cannot read config file: {exc}") from None
    overrides = {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG and v is not None}
    overrides["mode"] = _MODE[args.command]
    return parse_config(text, overrides)


def _print_rows(out, header, rows) -> None:
    out.write(",".join(header) + "\n")
    for r in rows:
        out.write(",".join(fmt(c) if isinstance(c, float) else str(c) for c in r) + "\n")


def _cmd_particles(cfg: ExperimentConfig, out) -> int:
    tg = cfg.time_grid()
    forcing = Forcing.brownian(generate_noise(cfg.common_seed, tg))
    run = run_particle_system(
        cfg.model(), cfg.initial(), tg, cfg.n_particles, forcing, cfg.idio_seed, snapshot_every=cfg.snapshot_every
    )
    if cfg.out_loss:
        run.loss.to_csv(cfg.out_loss)
    cascades = sum(j.cause == "cascade" for j in run.loss.jumps)
    _print_rows(
        out,
        ["n_particles", "t_final", "L_final", "n_loss_steps", "n_cascades", "saturated"],
        [(cfg.n_particles, tg.horizon, run.loss.final, len(run.loss.jumps), cascades, int(run.saturated))],
    )
    return 0


def _cmd_density(cfg: ExperimentConfig, out) -> int:
    scfg = cfg.solver_config()
    noise = generate_noise(cfg.common_seed, scfg.time)
    res = run_density_solver(cfg.model(), cfg.initial(), scfg, Forcing.brownian(noise), confirm=cfg.confirm)
    if cfg.out_loss:
        res.loss.to_csv(cfg.out_loss)
    if cfg.out_noise:
        noise.to_csv(cfg.out_noise)
    if cfg.out_density and res.final_density is not None:
        res.final_density.to_csv(cfg.out_density)
    if cfg.heatmap:
        if not res.snapshots:
            raise ValidationError("--heatmap needs --snapshot-every > 0")
        emit_heatmap(res.snapshots, cfg.heatmap)
    confirmed = "" if res.confirmed_events is None else len(res.confirmed_events)
    _print_rows(
        out,
        ["t_final", "L_final", "mass_final", "leaked_mass", "max_conservation_error", "n_blowup_events",
         "n_confirmed", "saturated"],
        [(
            scfg.time.horizon,
            res.loss.final,
            float(res.mass[-1]),
            res.leaked_mass_total,
            float(abs(res.conservation_error).max()),
            len(res.blowup_events),
            confirmed,
            int(res.saturated),
        )],
    )
    if res.blowup_events:
        out.write("\n")
        _print_rows(
            out,
            ["t_index", "t", "step_loss", "contagion"],
            [(e.time_index, e.time, e.step_loss, e.contagion) for e in res.blowup_events],
        )
    return 0


def _cmd_coupled(cfg: ExperimentConfig, out, report_path) -> int:
    rep = run_coupled(cfg, cfg.n_list, cfg.n_seeds)
    _print_rows(out, rep.HEADER, [(r.n, r.n_seeds, r.median, r.iqr) for r in rep.rows])
    if report_path:
        rep.to_csv(report_path)
    return 0


def _cmd_blowup_prob(cfg: ExperimentConfig, out) -> int:
    est = estimate_blowup_probability(cfg.model(), cfg.initial(), cfg.solver_config(), cfg.paths, cfg.base_seed)
    out.write(est.CSV_HEADER + "\n" + est.csv_row() + "\n")
    return 0


def _cmd_verdict(cfg: ExperimentConfig, out) -> int:
    params = cfg.model()
    v = static_verdict(cfg.initial(), params)
    _print_rows(out, ["criterion", "applicable", "fired"], [(n, int(a), int(f)) for n, a, f in v.table])
    out.write("\n")
    _print_rows(
        out,
        ["verdict", "reason", "curb_time"],
        [(v.value.value, v.reason.replace(",", ";"), curb_time(params, cfg.t_final))],
    )
    return 0


def _cmd_verify(names, out) -> int:
    from .verify import CHECKS, run_suite

    unknown = [n for n in names or () if n not in CHECKS]
    if unknown:
        raise ValidationError(f"unknown check(s) {unknown}; available: {', '.join(CHECKS)}")
    results = run_suite(names)
    _print_rows(out, ["check", "passed", "detail"], [(c.name, int(c.passed), c.detail.replace(",", ";")) for c in results])
    return 0 if all(c.passed for c in results) else 2


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
    except _ArgError as exc:
        print(exc, file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "verify":
            return _cmd_verify(args.check, out)
        cfg = _load_config(args)
        if args.command == "simulate-particles":
            return _cmd_particles(cfg, out)
        if args.command == "simulate-density":
            return _cmd_density(cfg, out)
        if args.command == "coupled":
            return _cmd_coupled(cfg, out, args.out_report)
        if args.command == "estimate-blowup-prob":
            return _cmd_blowup_prob(cfg, out)
        return _cmd_verdict(cfg, out)
    except (ValidationError, DomainError, GridMismatchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # numerical or I/O failure
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
