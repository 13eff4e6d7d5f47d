import json

import numpy as np
import pytest

from gastridge import cli
from gastridge.config import load_run_config
from gastridge.cycles import load_cycle_csv
from gastridge.errors import ConfigError
from gastridge.lfm import load_trace_csv
from gastridge.reference import load_error_csv, load_reference_csv


def run(tmp_path, *args, config=None):
    base = ["--out", str(tmp_path)]
    if config:
        base += ["--config", str(config)]
    return cli.main(base + list(args))


def test_build_cycle_kinds(tmp_path):
    assert run(tmp_path, "build-cycle", "--kind", "cc", "--duration", "60", "--name", "cc") == 0
    assert run(tmp_path, "build-cycle", "--kind", "pulse", "--pulses", "3", "--name", "p") == 0
    assert run(tmp_path, "build-cycle", "--kind", "walk", "--duration", "100", "--name", "w", "--seed", "1") == 0
    assert run(tmp_path, "build-cycle", "--kind", "cascade", "--inputs", str(tmp_path / "cc.csv"), str(tmp_path / "w.csv"),
               "--charge-duration", "30", "--name", "casc") == 0
    c = load_cycle_csv(tmp_path / "casc.csv")
    assert len(c) == 60 + 30 + 100
    assert np.all(c.current[60:90] < 0)


def test_walk_without_seed_is_an_error(tmp_path, capsys):
    assert run(tmp_path, "build-cycle", "--kind", "walk") == 1
    assert "seed" in capsys.readouterr().err


def test_simulate_and_gen_data_round_trip(tmp_path):
    run(tmp_path, "build-cycle", "--kind", "walk", "--duration", "120", "--name", "w", "--seed", "3")
    assert run(tmp_path, "simulate", str(tmp_path / "w.csv")) == 0
    tr = load_trace_csv(tmp_path / "w_trace.csv")
    assert len(tr) == 120
    cfg = tmp_path / "c.toml"
    cfg.write_text("seed = 1\n[surrogate]\nnoise_std = 0.001\n")
    assert run(tmp_path, "gen-data", str(tmp_path / "w.csv"), config=cfg) == 0
    ref = load_reference_csv(tmp_path / "w_ref.csv")
    seg = load_error_csv(tmp_path / "w_error.csv")
    np.testing.assert_allclose(seg.e_r, ref.v_ref - tr.v_lfm, atol=1e-15)


def test_missing_file_is_error(tmp_path):
    assert run(tmp_path, "simulate", str(tmp_path / "nope.csv")) == 1


def test_train_requires_seed(tmp_path):
    run(tmp_path, "build-cycle", "--kind", "cc", "--duration", "50", "--name", "a")
    cli.main(["--out", str(tmp_path), "gen-data", str(tmp_path / "a.csv")])
    assert run(tmp_path, "train", "--train", str(tmp_path / "a_error.csv"), "--valid", str(tmp_path / "a_error.csv")) == 1


def test_train_infeasible_exit_code(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text(
        "seed = 2\n[surrogate]\nnoise_std = 0.05\n[ga]\npopulation_size = 6\ngenerations = 1\nepsilon = 1e-9\n"
    )
    for name, seed in (("a", "1"), ("b", "2")):
        run(tmp_path, "build-cycle", "--kind", "walk", "--duration", "200", "--name", name, "--seed", seed, config=cfg)
    run(tmp_path, "gen-data", str(tmp_path / "a.csv"), str(tmp_path / "b.csv"), config=cfg)
    code = run(tmp_path, "train", "--train", str(tmp_path / "a_error.csv"), "--valid", str(tmp_path / "b_error.csv"), config=cfg)
    assert code == 2
    model = json.loads((tmp_path / "model.json").read_text())
    assert model["metadata"]["feasible"] is False


def test_config_errors(tmp_path):
    bad = tmp_path / "c.toml"
    bad.write_text("[gaa]\nx = 1\n")
    with pytest.raises(ConfigError):
        load_run_config(bad)
    bad.write_text("[cell]\nfile = 'missing.toml'\n")
    with pytest.raises(ConfigError):
        load_run_config(bad)
    bad.write_text("[surrogate]\n[[surrogate.planted]]\nfamily='pol'\nexponents=[1,0,0,0]\ncoefficient=0.1\n")
    with pytest.raises(ConfigError):
        load_run_config(bad).surrogate_spec()
    assert run(tmp_path, "simulate", "x.csv", config=tmp_path / "none.toml") == 1


def test_config_cell_override(tmp_path):
    from importlib import resources

    cell = tmp_path / "cell.toml"
    cell.write_text((resources.files("gastridge") / "data" / "default_cell.toml").read_text())
    cfg = tmp_path / "c.toml"
    cfg.write_text("[cell]\nfile = 'cell.toml'\ncontact_resistance = 0.03\n[cell.negative]\nreaction_rate = 1e-10\n[library]\npreset = 'extended'\n")
    rc = load_run_config(cfg)
    assert rc.cell.contact_resistance == 0.03
    assert rc.cell.negative.reaction_rate == 1e-10
    assert rc.library.max_degree == 3
