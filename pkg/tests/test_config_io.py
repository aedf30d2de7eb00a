import json
import math

import numpy as np
import pytest

from reactive_ro import io as rio
from reactive_ro.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main
from reactive_ro.config import (Controls, load_config, parse_config, shipped_config, to_ini)
from reactive_ro.errors import ConfigError
from reactive_ro.grid import build_grid

from conftest import small_config_text


def drop_key(text, key):
    return "\n".join(line for line in text.splitlines() if not line.strip().startswith(key))


class TestParse:
    def test_table1(self, table1):
        assert table1.reynolds() == pytest.approx(300.0)
        assert [s.name for s in table1.species] == ["a", "b"]
        assert table1.reactions[0].reactants == {"a": 1, "b": 1}
        assert table1.solids == {"s": 27e-6}
        assert table1.k0 == 1e-16 and table1.epsilon0 == 0.7 and table1.ell == 1e-4

    def test_paper_comparison(self):
        cfg = load_config(shipped_config("paper_comparison"))
        assert cfg.p_out == 1.8e6 and cfg.initial_velocity == "developed"
        assert all(s.phi_init == s.phi_in for s in cfg.species)

    def test_defaults(self, small_config):
        c = small_config.controls
        d = Controls(dt=1.0, t_end=1.0)
        assert (c.picard_tol, c.picard_max, c.pressure_solver) == (1e-6, 50, "direct")
        assert d.output_times == (6 * 3600.0, 12 * 3600.0, 28 * 3600.0)
        assert small_config.species[0].D == 1.5e-9

    def test_missing_key(self):
        with pytest.raises(ConfigError) as info:
            parse_config(drop_key(small_config_text(), "mu"))
        assert str(info.value) == "[fluid].mu: missing required key"
        assert info.value.key == "[fluid].mu"

    @pytest.mark.parametrize("old, new, key", [
        ("mu = 1e-3", "mu = -1", "[fluid].mu"),
        ("nx = 12", "nx = 2.5", "[geometry].nx"),
        ("epsilon0 = 0.7", "epsilon0 = 1.2", "[membrane].epsilon0"),
        ("K = 0.1", "K = -1", "[reaction.1].K"),
        ("reactants = a:1, b:1", "reactants = a:1, c:1", "[reaction.1].reactants"),
        ("reactants = a:1, b:1", "reactants = a:x", "[reaction.1].reactants"),
        ("phi_in = 201.85\nphi_init = 201.85\n\n[species.b]",
         "phi_in = -1\nphi_init = 201.85\n\n[species.b]", "[species.a].phi_in"),
        ("dt = 0.001", "dt = abc", "[controls].dt"),
    ])
    def test_invalid_values(self, old, new, key):
        text = small_config_text()
        assert old in text
        with pytest.raises(ConfigError) as info:
            parse_config(text.replace(old, new, 1))
        assert info.value.key == key

    def test_unknown_section(self):
        with pytest.raises(ConfigError) as info:
            parse_config(small_config_text(extra="[extras]\nfoo = 1\n"))
        assert info.value.key == "[extras]"

    def test_inline_comments(self):
        cfg = parse_config(small_config_text().replace("mu = 1e-3", "mu = 1e-3  # Pa s"))
        assert cfg.mu == 1e-3

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.cfg")

    def test_with_kinetics(self, small_config):
        assert small_config.with_kinetics(1e-5).reactions[0].K == 1e-5
        assert small_config.with_kinetics(1e-5).network().K.tolist() == [1e-5]


class TestRoundTrip:
    @pytest.mark.parametrize("name", ["table1", "paper_comparison"])
    def test_shipped(self, name):
        cfg = load_config(shipped_config(name))
        assert parse_config(to_ini(cfg)) == cfg

    def test_idempotent(self, small_config):
        text = to_ini(small_config)
        assert to_ini(parse_config(text)) == text


def series(n, rng):
    return [rio.SeriesRecord(*rng.normal(size=6)) for _ in range(n)]


class TestCsv:
    def test_timeseries_round_trip(self, tmp_path, rng):
        s = series(7, rng)
        rio.write_timeseries(tmp_path / "ts.csv", s)
        assert rio.read_timeseries(tmp_path / "ts.csv") == s
        first = (tmp_path / "ts.csv").read_bytes().split(b"\n")[0]
        assert first == b"t_s,eps_mean,k_mean,v_mean,recovery,dpi_mean"

    def test_empty_series(self, tmp_path):
        with pytest.raises(ValueError):
            rio.write_timeseries(tmp_path / "ts.csv", [])

    def test_profile_round_trip(self, tmp_path, rng):
        p = rio.Profile(1.0, np.linspace(0, 1, 9), *rng.normal(size=(4, 9)))
        rio.write_profiles(tmp_path / "p.csv", p)
        back = rio.read_profiles(tmp_path / "p.csv", 1.0)
        for a, b in zip(p.columns(), back.columns()):
            np.testing.assert_array_equal(a, b)

    def test_profile_must_ascend(self, tmp_path):
        p = rio.Profile(0.0, np.array([0.0, 2.0, 1.0]), *np.zeros((4, 3)))
        with pytest.raises(ValueError):
            rio.write_profiles(tmp_path / "p.csv", p)

    def test_comparison_round_trip(self, tmp_path):
        rows = [(1e-10, 0.7, 1e-16, 0.01, "ok"), (0.1, math.nan, math.nan, math.nan, "failed")]
        rio.write_comparison(tmp_path / "c.csv", rows)
        back = rio.read_comparison(tmp_path / "c.csv")
        assert back[0] == rows[0]
        assert back[1][4] == "failed" and math.isnan(back[1][1])

    def test_wrong_header(self, tmp_path):
        (tmp_path / "x.csv").write_text("a,b\n1,2\n")
        with pytest.raises(ValueError):
            rio.read_timeseries(tmp_path / "x.csv")


class TestSnapshot:
    def test_single_cell(self, tmp_path):
        g = build_grid(1.0, 1.0, 1, 1)
        rio.write_snapshot(tmp_path / "s.vtk", g, {"p": np.array([[3.5]])})
        text = (tmp_path / "s.vtk").read_text()
        assert "DIMENSIONS 2 2 2" in text and "CELL_DATA 1" in text
        dims, fields = rio.read_snapshot(tmp_path / "s.vtk")
        assert dims == (1, 1) and fields["p"][0, 0] == 3.5

    def test_round_trip_x_fastest(self, tmp_path, rng):
        g = build_grid(0.02, 0.003, 5, 3)
        u = rng.normal(size=g.shape)
        rio.write_snapshot(tmp_path / "s.vtk", g, {"u": u, "v": 2 * u})
        lines = (tmp_path / "s.vtk").read_text().splitlines()
        first = lines.index("LOOKUP_TABLE default") + 1
        assert float(lines[first + 1]) == u[1, 0]
        dims, fields = rio.read_snapshot(tmp_path / "s.vtk")
        assert dims == (5, 3) and list(fields) == ["u", "v"]
        np.testing.assert_array_equal(fields["u"], u)

    def test_shape_check(self, tmp_path):
        with pytest.raises(ValueError):
            rio.write_snapshot(tmp_path / "s.vtk", build_grid(1, 1, 2, 2), {"u": np.zeros((3, 2))})


class TestManifest:
    def test_contents(self, tmp_path, small_config):
        rio.write_manifest(tmp_path, small_config, {"status": "ok", "x": np.float64(1.5)})
        m = json.loads((tmp_path / "manifest.json").read_text())
        assert m["summary"] == {"status": "ok", "x": 1.5}
        assert {"numpy", "scipy", "python", "reactive_ro"} <= set(m["versions"])
        assert load_config(tmp_path / "config.cfg") == small_config


class TestCli:
    def write(self, tmp_path, controls=""):
        path = tmp_path / "c.cfg"
        text = small_config_text(nx=6, ny=3, t_end=0.003)
        path.write_text(text.replace("[controls]\n", "[controls]\n" + controls))
        return str(path)

    def test_validate(self, capsys):
        assert main(["validate", "--config", str(shipped_config("table1"))]) == EXIT_OK
        assert "Re = 300" in capsys.readouterr().out

    def test_usage_errors(self, capsys):
        assert main([]) == EXIT_USAGE
        assert main(["frobnicate"]) == EXIT_USAGE
        assert main(["run", "--config", "x.cfg"]) == EXIT_USAGE
        assert main(["sweep", "--config", "x.cfg", "--out", "o", "--kinetics", "a,b"]) == EXIT_USAGE
        assert main(["--help"]) == EXIT_OK

    def test_config_error(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text(drop_key(small_config_text(), "mu"))
        assert main(["validate", "--config", str(path)]) == EXIT_USAGE
        assert "[fluid].mu" in capsys.readouterr().err

    def test_run_writes_outputs(self, tmp_path):
        out = tmp_path / "out"
        assert main(["run", "--config", self.write(tmp_path), "--out", str(out)]) == EXIT_OK
        assert len(rio.read_timeseries(out / "timeseries.csv")) == 4
        assert (out / "profile_t0.003s.csv").exists()
        assert json.loads((out / "manifest.json").read_text())["summary"]["status"] == "ok"

    def test_sweep(self, tmp_path):
        out = tmp_path / "out"
        code = main(["sweep", "--config", self.write(tmp_path), "--out", str(out),
                     "--kinetics", "1e-10,0.1"])
        assert code == EXIT_OK
        rows = rio.read_comparison(out / "comparison.csv")
        assert [r[0] for r in rows] == [1e-10, 0.1] and all(r[4] == "ok" for r in rows)
        assert (out / "K_1e-10" / "timeseries.csv").exists()

    def test_runtime_failure(self, tmp_path, capsys):
        path = self.write(tmp_path, controls="cfl_warn = 1e-4\ncfl_abort = 2e-4\n")
        assert main(["run", "--config", path, "--out", str(tmp_path / "o")]) == EXIT_RUNTIME
        assert "Courant" in capsys.readouterr().err
        m = json.loads((tmp_path / "o" / "manifest.json").read_text())
        assert m["summary"]["status"] == "failed"
