import csv
import json

import pytest

from dlsched.cli import main
from dlsched.config import load_config, load_sweep_spec
from dlsched.engine import ConfigError


RUN_CFG = """
# comment line
users.n_rt = 2
users.n_nrt = 2
traffic.lambda_rt = 0.2
traffic.lambda_nrt = 0.4
qos.delivery_target = 0.3
power.p_avg = 10
power.p_max = 20
control.b_max = 500
control.scheduler = onoff
run.horizon = 2000
run.seed = 4
"""


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(RUN_CFG)
    return path


class TestConfigLoading:
    def test_flat_and_json_equivalent(self, tmp_path, cfg_file):
        flat = load_config(cfg_file, apply_env=False)
        jpath = tmp_path / "run.json"
        jpath.write_text(json.dumps({
            "users": {"n_rt": 2, "n_nrt": 2},
            "traffic": {"lambda_rt": 0.2, "lambda_nrt": 0.4},
            "qos": {"delivery_target": 0.3},
            "power": {"p_avg": 10, "p_max": 20},
            "control": {"b_max": 500, "scheduler": "onoff"},
            "run": {"horizon": 2000, "seed": 4},
        }))
        assert load_config(jpath, apply_env=False) == flat

    def test_plain_field_names_accepted(self, tmp_path):
        path = tmp_path / "plain.cfg"
        path.write_text("n_rt = 1\nn_nrt = 1\nhorizon = 10\n")
        cfg = load_config(path, apply_env=False)
        assert cfg.n_rt == 1 and cfg.horizon == 10

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("users.n_rtt = 2\n")
        with pytest.raises(ConfigError, match="n_rtt"):
            load_config(path, apply_env=False)

    def test_invalid_value_names_field(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("qos.delivery_target = 1.5\nrun.horizon = 10\n")
        with pytest.raises(ConfigError, match="q"):
            load_config(path, apply_env=False)

    def test_env_override(self, tmp_path, cfg_file, monkeypatch):
        monkeypatch.setenv("DLSCHED_SEED", "99")
        cfg = load_config(cfg_file)
        assert cfg.seed == 99

    def test_lists_parse(self, tmp_path):
        path = tmp_path / "lists.cfg"
        path.write_text("n_rt = 2\nn_nrt = 1\nlambda_rt = [0.1, 0.4]\n"
                        "q = [0.2, 0.3]\nhorizon = 10\n")
        cfg = load_config(path, apply_env=False)
        assert cfg.rt_rates() == [0.1, 0.4]

    def test_sweep_spec_json(self, tmp_path):
        path = tmp_path / "sweep.json"
        path.write_text(json.dumps({
            "base": {"run": {"horizon": 100}},
            "axis": "q", "values": [0.1, 0.2], "seeds": [1],
            "schedulers": ["onoff"]}))
        spec = load_sweep_spec(path)
        cfg = spec.cell_config(0.2, 1, "onoff")
        assert cfg.q == 0.2 and cfg.horizon == 100

    def test_sweep_axis_validation(self, tmp_path):
        path = tmp_path / "sweep.json"
        path.write_text(json.dumps({"base": {}, "axis": "nope",
                                    "values": [1], "seeds": [1]}))
        with pytest.raises(ConfigError, match="axis"):
            load_sweep_spec(path)


class TestRunCommand:
    def test_outputs(self, tmp_path, cfg_file):
        out = tmp_path / "out"
        rc = main(["run", "--config", str(cfg_file), "--out", str(out),
                   "--decisions"])
        assert rc == 0
        report = json.loads((out / "report.json").read_text())
        assert report["summary"]["budget_violations"] == 0
        with open(out / "trace.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert rows and "avg_power" in rows[0]
        with open(out / "decisions.csv") as fh:
            drows = list(csv.DictReader(fh))
        assert len(drows) == 2000
        assert (out / "run_trace.png").exists()

    def test_strict_exit_code(self, tmp_path, cfg_file):
        # 2000 slots are too short for the 1e-3 stability proxies.
        out = tmp_path / "strict"
        rc = main(["run", "--config", str(cfg_file), "--out", str(out),
                   "--strict"])
        assert rc == 1

    def test_config_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("qos.delivery_target = 1.5\n")
        rc = main(["run", "--config", str(bad), "--out", str(tmp_path / "o")])
        assert rc == 2

    def test_missing_file_exit_code(self, tmp_path):
        rc = main(["run", "--config", str(tmp_path / "nope.cfg"),
                   "--out", str(tmp_path / "o")])
        assert rc == 2


class TestSweepCommand:
    def test_row_count_and_schema(self, tmp_path):
        spec = tmp_path / "sweep.json"
        spec.write_text(json.dumps({
            "base": {"users": {"n_rt": 2, "n_nrt": 2},
                     "traffic": {"lambda_rt": 0.3, "lambda_nrt": 1.0},
                     "control": {"b_max": 200, "heavy_traffic": True},
                     "run": {"horizon": 500, "seed": 1}},
            "axis": "p_avg", "values": [2, 10], "seeds": [1, 2, 3],
            "schedulers": ["onoff", "fixedp"]}))
        out = tmp_path / "sw"
        assert main(["sweep", "--spec", str(spec), "--out", str(out)]) == 0
        with open(out / "sweep.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2 * 3 * 2
        assert (out / "sweep_p_avg.png").exists()
        # Common random numbers: same (value, seed) cells are ordered and
        # self-consistent on reread.
        key = {(r["value"], r["seed"], r["scheduler"]) for r in rows}
        assert len(key) == len(rows)

    def test_parallel_matches_serial(self, tmp_path):
        spec = tmp_path / "sweep.json"
        spec.write_text(json.dumps({
            "base": {"run": {"horizon": 300, "seed": 1},
                     "users": {"n_rt": 1, "n_nrt": 1}},
            "axis": "p_avg", "values": [5, 10], "seeds": [1, 2],
            "schedulers": ["onoff"]}))
        out1, out2 = tmp_path / "s1", tmp_path / "s2"
        main(["sweep", "--spec", str(spec), "--out", str(out1)])
        main(["sweep", "--spec", str(spec), "--out", str(out2), "--jobs", "2"])
        assert (out1 / "sweep.csv").read_text() == (out2 / "sweep.csv").read_text()


class TestRegionCommand:
    def test_boundary_csv(self, tmp_path):
        query = tmp_path / "region.json"
        query.write_text(json.dumps({
            "p_avg": 20.0, "p_max": 20.0, "states": [1.0], "probs": [1.0],
            "power_levels": 32, "rays": [[1.0]]}))
        out = tmp_path / "rg"
        assert main(["region", "--query", str(query), "--out", str(out)]) == 0
        with open(out / "boundary.csv") as fh:
            rows = list(csv.DictReader(fh))
        boundary = [r for r in rows if r["verdict"] == "boundary"]
        assert len(boundary) == 1
        import math
        assert float(boundary[0]["lambda_0"]) == pytest.approx(
            math.log(21.0), rel=0.02)
        assert all(r["verdict"] == "inside" for r in rows
                   if float(r["margin"]) >= 0.25)


class TestSelftest:
    def test_passes(self):
        assert main(["selftest"]) == 0
