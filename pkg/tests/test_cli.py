import json
import math
import py_compile

import pytest

from noma_airlink import cli
from noma_airlink.config import (
    ScenarioConfig,
    SweepSection,
    config_from_dict,
    parse_config,
    scenario_at,
    sweep_points,
)
from noma_airlink.errors import NonConvergence, ParseError, ValidationError


def write(tmp_path, text, name="c.json"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestParse:
    def test_empty_file_gives_defaults(self, tmp_path):
        cfg = parse_config(write(tmp_path, ""))
        assert cfg == ScenarioConfig()
        scn = scenario_at(cfg, sweep_points(cfg)[0])
        assert scn.region.delta == pytest.approx(math.radians(5.0))
        assert scn.radio.rho == pytest.approx(10**5.5)
        assert (scn.pair.j, scn.pair.i) == (20, 25)

    def test_degrees_converted(self, tmp_path):
        cfg = parse_config(write(tmp_path, '{"region": {"delta": 1}}'))
        assert scenario_at(cfg, sweep_points(cfg)[0]).region.delta == pytest.approx(math.radians(1.0))

    def test_power_order_violation(self, tmp_path):
        with pytest.raises(ValidationError, match="beta_j"):
            parse_config(write(tmp_path, '{"noma": {"beta_j_sq": 0.8}}'))

    def test_unknown_key_has_line(self, tmp_path):
        with pytest.raises(ParseError, match="line 3"):
            parse_config(write(tmp_path, '{\n  "radio": {\n    "pt": 3\n  }\n}'))

    def test_unknown_section(self, tmp_path):
        with pytest.raises(ParseError, match="unknown section"):
            parse_config(write(tmp_path, '{"beam": {}}'))

    def test_bad_json_has_line(self, tmp_path):
        with pytest.raises(ParseError, match="line 2"):
            parse_config(write(tmp_path, '{\n "run": {"seed": }\n}'))

    def test_type_errors(self):
        with pytest.raises(ParseError):
            config_from_dict({"run": {"n_trials": 1.5}})
        with pytest.raises(ParseError):
            config_from_dict({"sweep": {"pairs": [[20]]}})

    @pytest.mark.parametrize(
        "data",
        [
            {"run": {"mode": "fast"}},
            {"run": {"strategies": ["nearest"]}},
            {"run": {"n_trials": 0}},
            {"sweep": {"h_list": [5]}},
            {"noma": {"j": 30, "i": 25}},
            {"region": {"l1": 120}},
        ],
    )
    def test_validation_errors(self, data):
        with pytest.raises(ValidationError):
            config_from_dict(data)

    def test_altitude_limit_can_be_lifted(self):
        cfg = config_from_dict({"sweep": {"h_list": [5.0], "enforce_altitude_limits": False}})
        assert sweep_points(cfg)[0].h == 5.0

    def test_default_sweep(self):
        pts = sweep_points(ScenarioConfig())
        assert [p.h for p in pts] == [10.0 * k for k in range(1, 16)]

    def test_grid_order(self):
        cfg = ScenarioConfig(sweep=SweepSection(h_list=(10.0, 20.0), delta_grid=(1.0, 5.0), pairs=((20, 25), (40, 50))))
        pts = sweep_points(cfg)
        assert len(pts) == 8
        assert [(p.j, p.delta_deg, p.h) for p in pts[:3]] == [(20, 1.0, 10.0), (20, 1.0, 20.0), (20, 5.0, 10.0)]


class TestRun:
    def test_row_count_and_schema(self, tmp_path):
        cfg = ScenarioConfig().with_run(n_trials=300, seed=1)
        out = tmp_path / "r.csv"
        rows = cli.run_sweep(cfg, out, threads=1)
        assert len(rows) == 15 * 4 * 2
        raw = out.read_bytes()
        assert b"\r" not in raw
        lines = raw.decode().splitlines()
        assert lines[0].split(",") == list(cli.CSV_COLUMNS)
        assert len(lines) == 121
        py_compile.compile(str(tmp_path / "r_plot.py"), doraise=True)

    def test_byte_identical_rerun_and_threads(self, tmp_path):
        cfg = ScenarioConfig(sweep=SweepSection(h_list=(30.0, 120.0))).with_run(n_trials=3000, seed=9)
        a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
        cli.run_sweep(cfg, a, threads=1)
        cli.run_sweep(cfg, b, threads=1)
        cli.run_sweep(cfg, c, threads=4)
        assert a.read_bytes() == b.read_bytes() == c.read_bytes()

    def test_failure_leaves_no_file(self, tmp_path, monkeypatch):
        def boom(*a, **k):
            raise NonConvergence("forced")

        monkeypatch.setattr(cli, "analyze", boom)
        cfg_path = write(tmp_path, '{"run": {"mode": "analytic"}, "sweep": {"h_list": [50]}}')
        out = tmp_path / "res.csv"
        assert cli.main(["run", "--config", str(cfg_path), "--out", str(out), "--threads", "1"]) == 3
        assert list(tmp_path.iterdir()) == [cfg_path]

    def test_consistency_failure_sets_exit_code(self, tmp_path, monkeypatch):
        monkeypatch.setattr(cli, "consistent", lambda rep, est: False)
        cfg_path = write(tmp_path, '{"run": {"n_trials": 200, "strategies": ["angle"]}, "sweep": {"h_list": [50]}}')
        out = tmp_path / "res.csv"
        assert cli.main(["run", "--config", str(cfg_path), "--out", str(out)]) == 1
        assert out.exists() and "false" in out.read_text()

    def test_run_command(self, tmp_path, capsys):
        cfg_path = write(tmp_path, '{"run": {"n_trials": 500, "strategies": ["fullcsi"]}, "sweep": {"h_list": [50]}}')
        out = tmp_path / "res.csv"
        assert cli.main(["run", "--config", str(cfg_path), "--out", str(out), "--seed", "3", "--no-plot-script"]) == 0
        echoed = json.loads(capsys.readouterr().out)
        assert echoed["run"]["seed"] == 3 and echoed["region"]["l1"] == 85.0
        rows = out.read_text().splitlines()
        assert len(rows) == 3 and rows[1].endswith(",true")
        assert not (tmp_path / "res_plot.py").exists()

    def test_validate_command(self, tmp_path, capsys):
        assert cli.main(["validate", "--config", str(write(tmp_path, ""))]) == 0
        assert json.loads(capsys.readouterr().out)["noma"]["beta_i_sq"] == 0.75
        assert cli.main(["validate", "--config", str(write(tmp_path, '{"noma": {"beta_j_sq": 0.8}}'))]) == 2

    @pytest.mark.parametrize("family", sorted(cli.FIGURE_PRESETS))
    def test_presets_validate(self, family, capsys):
        assert cli.main(["figures", "--family", family, "--print-config"]) == 0
        data = json.loads(capsys.readouterr().out)
        config_from_dict(data)

    def test_analytic_mode_rows(self, tmp_path):
        cfg = ScenarioConfig(sweep=SweepSection(h_list=(50.0,))).with_run(mode="analytic")
        rows = cli.run_sweep(cfg, None)
        assert [r.mode for r in rows] == ["analytic"] * 4
        assert all(r.consistency_ok is None for r in rows)
