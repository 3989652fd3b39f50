import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from varqec import harness as hs
from varqec.optimize import TrainingResult

TINY_PD = """
experiment = "PD_MEMORY"
seed = 3

[layout]
k = 1
n = 2
r = 1

[ansatz]
encoder = "A"
decoder = "A"
l_V = 1
l_W = 1

[noise]
kind = "PD"
p = 0.091
t_step_us = 1.8

[bare_noise]
kind = "PD"
p = 0.045

[optimizer]
restarts = 2
init_candidates = 4
max_iters = 25

[memory]
M_max = 20
"""

TINY_APD = """
experiment = "APD_SWEEP"
seed = 2

[layout]
n = 2
scope = "LOGICAL_MARGINAL"

[ansatz]
encoder = "B"
decoder = "B"
l_V = 1
l_W = 1

[noise]
kind = "APD"
t_step_us = 4.0
T1_us = 57.0
T2_us = 19.0

[optimizer]
restarts = 1
init_candidates = 3
max_iters = 10

[alternating]
iters = 5
restarts = 1

[sweep]
wait_times_us = [1.0, 4.0]
warm_iters = 5
"""


@pytest.fixture
def pd_config(tmp_path):
    p = tmp_path / "pd.toml"
    p.write_text(TINY_PD)
    return p


@pytest.fixture
def apd_config(tmp_path):
    p = tmp_path / "apd.toml"
    p.write_text(TINY_APD)
    return p


def test_parse_config_defaults_and_units(pd_config):
    cfg = hs.load_config(pd_config)
    assert cfg.experiment == "PD_MEMORY"
    assert cfg.layout.total_qubits == 3
    assert cfg.noise.t_step == pytest.approx(1.8e-6)
    assert cfg.bare_noise.phase_flip_prob == 0.045
    assert cfg.optimizer.seed == 3
    assert hs.load_config(pd_config, seed=11).optimizer.seed == 11


@pytest.mark.parametrize(
    "patch,key",
    [
        ({"colour": 1}, "colour"),
        ({"layout": {"q": 1}}, "layout.q"),
        ({"noise": {"T3_us": 1}}, "noise.T3_us"),
        ({"optimizer": {"memory": 3}}, "optimizer.memory"),
        ({"experiment": "DANCE"}, "experiment"),
        ({"seed": -1}, "seed"),
        ({"optimizer": {"restarts": 0}}, "optimizer"),
        ({"ansatz": {"encoder": "Q"}}, "ansatz.encoder"),
    ],
)
def test_bad_config_names_the_key(patch, key):
    with pytest.raises(hs.ConfigError) as err:
        hs.parse_config(patch)
    assert err.value.key == key


def test_bundled_configs_parse():
    pd = hs.load_config(hs.bundled_config("pd.toml"))
    assert (pd.layout.n, pd.layout.r, pd.l_V, pd.l_W) == (3, 2, 10, 15)
    assert pd.encoder_circuit().param_count == 146
    apd = hs.load_config(hs.bundled_config("apd.toml"))
    assert apd.decoder_circuit().param_count == 420
    assert apd.trained.exists() and pd.trained.exists()


def test_bias_bound_csv():
    rows = list(csv.reader(hs.bias_bound_csv(1, 8).splitlines()))
    assert rows[0] == ["l", "p_l"]
    assert rows[1] == ["2", "0.625"]
    assert len(rows) == 8


def test_cli_bias_bound_subprocess(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "varqec", "bias-bound", "--k", "1", "--lmax", "4"], capture_output=True, text=True, check=True
    )
    assert out.stdout.splitlines()[1] == "2,0.625"


def test_cli_train_twice_is_byte_identical(pd_config, tmp_path):
    assert hs.main(["train", "--config", str(pd_config), "--seed", "7", "--out", str(tmp_path / "a")]) == 0
    assert hs.main(["train", "--config", str(pd_config), "--seed", "7", "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "trained.json").read_bytes()
    assert a == (tmp_path / "b" / "trained.json").read_bytes()
    assert json.loads(a)["config"]["seed"] == 7


def test_cli_output_dirs_are_create_only(pd_config, tmp_path, capsys):
    out = tmp_path / "once"
    assert hs.main(["bias-bound", "--out", str(out)]) == 0
    assert hs.main(["bias-bound", "--out", str(out)]) == 1
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "FileExistsError"


def test_cli_malformed_config(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('[noise]\nkind = "PD"\nwobble = 1\n')
    assert hs.main(["train", "--config", str(bad)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["key"] == "noise.wobble"
    broken = tmp_path / "broken.toml"
    broken.write_text("[noise\n")
    assert hs.main(["train", "--config", str(broken)]) == 2


def test_evaluate_round_trip_and_memory(pd_config, tmp_path):
    assert hs.main(["train", "--config", str(pd_config), "--out", str(tmp_path / "t")]) == 0
    trained = tmp_path / "t" / "trained.json"
    assert hs.main(["evaluate", "--config", str(pd_config), "--load", str(trained), "--out", str(tmp_path / "e")]) == 0
    ev = json.loads((tmp_path / "e" / "evaluation.json").read_text())
    assert ev["fidelity"] == pytest.approx(ev["stored_fidelity"], abs=1e-12)
    rows = list(csv.DictReader((tmp_path / "e" / "pd_memory.csv").open()))
    assert len(rows) == 20
    assert list(rows[0]) == ["M", "t_us", "F_qvector", "F_optimal", "F_bare"]
    m = np.array([float(r["M"]) for r in rows])
    bare = np.array([float(r["F_bare"]) for r in rows])
    assert np.allclose(bare, 2 / 3 + (1 / 3) * 0.91**m, atol=1e-12)
    q = 3 * 0.091**2 - 2 * 0.091**3
    opt = np.array([float(r["F_optimal"]) for r in rows])
    assert np.allclose(opt, 2 / 3 + (1 / 3) * (1 - 2 * q) ** m, atol=1e-10)
    rec = json.loads((tmp_path / "e" / "record.json").read_text())
    assert rec["config"]["layout"]["n"] == 2
    assert rec["summary"]["T2eff_us"]["bare"] == pytest.approx(19.09, abs=0.05)


def test_memory_csv_is_reproducible(pd_config):
    cfg = hs.load_config(pd_config)
    res = hs.run_train(cfg)
    _, a = hs.run_pd_memory(cfg, res)
    _, b = hs.run_pd_memory(cfg, TrainingResult.from_json(res.to_json()))
    assert a == b


def test_evaluate_without_parameters_fails(pd_config, capsys):
    assert hs.main(["evaluate", "--config", str(pd_config)]) == 1


def test_sweep_and_table(apd_config, tmp_path):
    cfg = hs.load_config(apd_config)
    trained = hs.run_train(cfg)
    rec, text = hs.run_apd_sweep(cfg, trained)
    rows = list(csv.DictReader(text.splitlines()))
    assert [float(r["t_us"]) for r in rows] == [1.0, 4.0]
    for r in rows:
        # warm start cannot end below the start, and the optimum dominates the bare qubit
        assert float(r["F_alternating"]) >= float(r["F_none"]) - 1e-9
    rec, text = hs.run_pta_table(cfg, trained)
    table = {r["scheme"]: r for r in csv.DictReader(text.splitlines())}
    assert set(table) == {"qvector", "alternating", "no_encoding", "five_qubit"}
    assert float(table["five_qubit"]["APD"]) == pytest.approx(float(table["five_qubit"]["PTA_APD"]), abs=1e-12)
    assert float(table["no_encoding"]["APD"]) == pytest.approx(float(table["no_encoding"]["PTA_APD"]), abs=1e-12)
    assert float(table["qvector"]["APD"]) == pytest.approx(trained.best_fidelity, abs=1e-12)


def test_sweep_short_waits_approach_one(apd_config):
    cfg = hs.load_config(apd_config)
    cfg = hs.parse_config({**cfg.raw, "sweep": {"wait_times_us": [1e-6], "warm_iters": 0}}, apd_config.parent)
    trained = hs.run_train(cfg)
    _, text = hs.run_apd_sweep(cfg, trained)
    row = next(csv.DictReader(text.splitlines()))
    for key in ("F_none", "F_five_qubit", "F_alternating"):
        assert float(row[key]) == pytest.approx(1.0, abs=1e-6)
