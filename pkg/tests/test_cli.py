from __future__ import annotations

import io
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfcontagion.cli import main
from mfcontagion.config import ExperimentConfig, parse_config
from mfcontagion.core import Density, LossPath, SpaceGrid, TimeGrid, ValidationError
from mfcontagion.experiments import emit_heatmap, run_coupled
from mfcontagion.io import pgm_bytes, read_density_csv


def run_cli(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


# -- config -------------------------------------------------------------------


def test_empty_file_plus_flags_is_valid():
    cfg = parse_config("", {"alpha": "0.5", "rho": "0.2", "init": "uniform:0.5:1.0", "dt": "0.01"})
    assert cfg.alpha == 0.5 and cfg.model().rho == 0.2


def test_rho_one_cites_non_degeneracy_bound():
    with pytest.raises(ValidationError, match="rho.*non-degeneracy"):
        parse_config("rho=1.0")


def test_negative_alpha_rejected():
    with pytest.raises(ValidationError, match="alpha"):
        parse_config("alpha=-1")


def test_unknown_key_rejected():
    with pytest.raises(ValidationError, match="gamma"):
        parse_config("gamma=3")


def test_flags_override_file():
    cfg = parse_config("alpha=0.3\ndt=0.01\n", {"alpha": 0.9})
    assert cfg.alpha == 0.9 and cfg.dt == 0.01


configs = st.builds(
    ExperimentConfig,
    alpha=st.floats(0, 5),
    rho=st.floats(0, 0.999),
    sigma=st.floats(0.01, 100),
    dt=st.sampled_from([1e-4, 5e-4, 1e-3, 2e-3, 0.01, 0.05, 0.1]),
    n_particles=st.integers(1, 10**6),
    common_seed=st.integers(0, 2**64 - 1),
    n_list=st.lists(st.integers(1, 10**5), min_size=1, max_size=4).map(tuple),
    image_kernel=st.booleans(),
    init=st.sampled_from(["dirac:1.0", "uniform:0.5:2.5", "tgauss:1.0:0.3"]),
)


@settings(max_examples=100, deadline=None)
@given(configs)
def test_parse_dump_is_a_fixed_point(cfg):
    text = cfg.dump()
    again = parse_config(text)
    assert again == cfg
    assert again.dump() == text


# -- file formats ---------------------------------------------------------------


def test_density_csv_round_trips_exactly(tmp_path):
    g = SpaceGrid(0.1, 1.0)
    d = Density(g, np.random.default_rng(0).random(g.n_points) / 3)
    d.to_csv(tmp_path / "d.csv")
    text = (tmp_path / "d.csv").read_text()
    assert text.startswith("x,value\n")
    x, v = read_density_csv(tmp_path / "d.csv")
    assert np.array_equal(v, d.values) and np.array_equal(x, g.nodes)


def test_loss_csv_layout(tmp_path):
    lp = LossPath.from_increments(TimeGrid(0.5, 2), [0.25, 0.0])
    lp.to_csv(tmp_path / "l.csv")
    assert (tmp_path / "l.csv").read_text() == "t_index,t,L,jump_size\n0,0,0,0\n1,0.5,0.25,0.25\n2,1,0.25,0\n"


def test_heatmap_all_zero_column():
    assert pgm_bytes([np.zeros(3)]) == b"P2\n1 3\n255\n0\n0\n0\n"


def test_heatmap_constant_column_is_white():
    assert pgm_bytes([np.full(2, 0.7)]) == b"P2\n1 2\n255\n255\n255\n"


def test_heatmap_two_columns_by_hand(tmp_path):
    g = SpaceGrid(1.0, 2.0)
    snaps = [(1, Density(g, [0.0, 1.0, 2.0])), (2, Density(g, [4.0, 0.5, 0.0]))]
    emit_heatmap(snaps, tmp_path / "h.pgm")
    # top row is the highest node; 255 * v / 4 rounded
    want = "P2\n2 3\n255\n128 0\n64 32\n0 255\n"
    assert (tmp_path / "h.pgm").read_text() == want


def test_heatmap_needs_a_snapshot():
    with pytest.raises(ValidationError):
        pgm_bytes([])


# -- coupled harness -------------------------------------------------------------


def test_coupled_single_row_report():
    cfg = parse_config("alpha=1\nrho=0.5\ninit=dirac:1.0\nt_final=0.1\ndt=0.002\ndx=0.01\nupper=4")
    rep = run_coupled(cfg, [50], 2)
    assert len(rep.rows) == 1 and rep.rows[0].n == 50 and rep.rows[0].n_seeds == 2


def test_coupled_without_feedback_scales_like_monte_carlo():
    cfg = parse_config("alpha=0\ninit=dirac:1.0\nt_final=0.5\ndt=0.005\ndx=0.005\nupper=6")
    rep = run_coupled(cfg, [100, 1000, 10000], 12)
    med = rep.medians()
    # sup-time error of an empirical first-passage law ~ N^-1/2
    ratios = med[:-1] / med[1:]
    assert np.all(ratios > np.sqrt(10) / 2) and np.all(ratios < np.sqrt(10) * 2)


# -- command line ----------------------------------------------------------------


def test_exit_code_validation_error(capsys):
    code, _ = run_cli("simulate-density", "--rho", "1.0")
    assert code == 1
    assert "non-degeneracy" in capsys.readouterr().err


def test_exit_code_bad_flag():
    assert run_cli("simulate-particles", "--no-such-flag")[0] == 1
    assert run_cli()[0] == 1


def test_exit_code_runtime_error(tmp_path):
    code, _ = run_cli(
        "simulate-particles", "--t-final", "0.01", "--n-particles", "10", "--out-loss", str(tmp_path / "nodir" / "x.csv")
    )
    assert code == 2


def test_config_file_and_flags(tmp_path):
    conf = tmp_path / "run.cfg"
    conf.write_text("alpha=0\ninit=dirac:1.0\nt_final=0.05\ndt=0.001\n# comment\n")
    code, out = run_cli("simulate-particles", "--config", str(conf), "--n-particles", "100")
    assert code == 0 and out.splitlines()[1].startswith("100,")


def test_verdict_table():
    code, out = run_cli("verdict", "--alpha", "1", "--init", "uniform:0.1:0.4")
    assert code == 0
    assert "MustBlowUp" in out and "support in (0" in out


def test_estimate_prints_csv_row():
    code, out = run_cli(
        "estimate-blowup-prob", "--init", "dirac:2.0", "--t-final", "0.2", "--dx", "0.005", "--upper", "5",
        "--paths", "7", "--base-seed", "1",
    )
    assert code == 0
    header, row = out.strip().splitlines()
    assert header == "n_paths,n_blowups,p_hat,ci_low,ci_high"
    assert row.startswith("7,0,0,0,")


def test_verify_subcommand():
    code, out = run_cli("verify", "--check", "cascade-oracle", "--check", "determinism")
    assert code == 0 and out.count(",1,") == 2
    assert run_cli("verify", "--check", "nope")[0] == 1


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "mfcontagion", "verdict", "--init", "dirac:2"], capture_output=True, text=True)
    assert r.returncode == 0 and "NeverBlowsUp" in r.stdout
