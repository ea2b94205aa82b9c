import json
from importlib import resources

import jsonschema
import pytest

from degstirap.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, main


def schema(name):
    return json.loads(resources.files("degstirap").joinpath("schemas", f"{name}.schema.json").read_text())


def run(tmp_path, *args):
    return main(["run", *args, "-o", str(tmp_path), "-q"])


class TestRun:
    def test_fig4(self, tmp_path):
        assert run(tmp_path, "fig4") == EXIT_OK
        rep = json.loads((tmp_path / "fig4_report.json").read_text())
        jsonschema.validate(rep, schema("report"))
        fp = rep["propagation"]["final_populations"]
        assert fp["f"] > 0.999 and fp["g"] < 1e-3 and fp["e"] < 1e-3
        assert rep["feasibility"]["verdict"] == "complete_any_initial"
        assert rep["adiabaticity"]["max_ratio"] < 0.1
        traj = json.loads((tmp_path / "fig4_trajectory.json").read_text())
        jsonschema.validate(traj, schema("trajectory"))
        assert (tmp_path / "fig4_trajectory.csv").read_text().startswith("t,")

    def test_fig8_residual(self, tmp_path):
        assert run(tmp_path, "fig8", "--no-adiabaticity", "--format", "json") == EXIT_OK
        rep = json.loads((tmp_path / "fig8_report.json").read_text())
        assert rep["propagation"]["final_populations"]["g"] > 0.05
        assert "adiabaticity" not in rep
        assert not (tmp_path / "fig8_trajectory.csv").exists()

    def test_mixed_schema(self, tmp_path):
        assert run(tmp_path, "fig5", "--points", "5", "--no-adiabaticity") == EXIT_OK
        jsonschema.validate(json.loads((tmp_path / "fig5_report.json").read_text()), schema("report"))
        jsonschema.validate(json.loads((tmp_path / "fig5_trajectory.json").read_text()), schema("trajectory"))

    def test_deterministic(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for d in (a, b):
            assert run(d, "fig10", "--points", "21") == EXIT_OK
        for f in ("fig10_report.json", "fig10_trajectory.json", "fig10_trajectory.csv"):
            assert (a / f).read_bytes() == (b / f).read_bytes()

    def test_override(self, tmp_path):
        assert run(tmp_path, "fig4", "--set", "pump.omega=5.0", "--points", "5", "--no-adiabaticity") == EXIT_OK
        rep = json.loads((tmp_path / "fig4_report.json").read_text())
        assert rep["propagation"]["final_populations"]["f"] < 0.99

    def test_integration_failure(self, tmp_path):
        code = run(tmp_path, "fig4", "--set", "integration.max_evaluations=50", "--no-adiabaticity")
        assert code == EXIT_NUMERICAL
        rep = json.loads((tmp_path / "fig4_report.json").read_text())
        assert rep["status"] == "failed" and "error" in rep["propagation"]
        jsonschema.validate(rep, schema("report"))

    def test_malformed(self, tmp_path, capsys):
        bad = tmp_path / "bad.toml"
        bad.write_text('name = "bad"\n[linkage]\nJ = = [1, 2, 3]\n')
        out = tmp_path / "out"
        assert run(out, str(bad)) == EXIT_USAGE
        assert not out.exists()
        assert "bad.toml:3:" in capsys.readouterr().err

    def test_invalid_content(self, tmp_path, capsys):
        src = resources.files("degstirap").joinpath("scenarios", "fig4.toml").read_text()
        bad = tmp_path / "bad.toml"
        bad.write_text(src.replace("M = 1,", "M = 7,"))
        out = tmp_path / "out"
        assert run(out, str(bad)) == EXIT_USAGE and not out.exists()
        assert "M=7" in capsys.readouterr().err

    def test_bad_tolerance(self, tmp_path):
        assert run(tmp_path / "o", "fig4", "--rtol", "-1") == EXIT_USAGE

    def test_explicit_matrix_scenario(self, tmp_path):
        f = tmp_path / "lam.toml"
        f.write_text('name = "lam"\n[linkage]\nP = [[10.0]]\nS = [[10.0]]\n'
                     '[pump]\nenvelope = {center = 2.0, width = 3.0}\n'
                     '[stokes]\nenvelope = {center = -2.0, width = 3.0}\n'
                     '[initial]\namplitudes = [{manifold = "g", index = 0, re = 1.0}]\n')
        assert run(tmp_path, str(f)) == EXIT_OK
        rep = json.loads((tmp_path / "lam_report.json").read_text())
        assert rep["propagation"]["final_populations"]["f"] > 0.99


class TestAnalyze:
    def test_verdicts(self, capsys):
        assert main(["analyze", "fig4", "fig2", "fig8", "fig9", "fig10", "--text"]) == EXIT_OK
        lines = dict(line.split(": ", 1) for line in capsys.readouterr().out.splitlines())
        assert lines["fig4"].startswith("complete_any_initial")
        assert lines["fig2"].startswith("partial") and "uncoupled g=2" in lines["fig2"]
        assert lines["fig8"].startswith("partial")
        assert lines["fig9"].startswith("conditional: requires special pump polarization")
        assert lines["fig10"].startswith("conditional: condition satisfied")

    def test_json(self, tmp_path, capsys):
        assert main(["analyze", "fig1", "-o", str(tmp_path), "-q"]) == EXIT_OK
        rep = json.loads((tmp_path / "fig1_analysis.json").read_text())
        assert rep["sizes"] == [5, 7, 9] and rep["dark_states"]["count"] == 7
        assert sorted(s["sizes"] for s in rep["subsystems"]) == [[2, 3, 4], [3, 4, 5]]
        assert capsys.readouterr().out == ""

    def test_unknown(self, capsys):
        assert main(["analyze", "nope"]) == EXIT_USAGE


class TestSweep:
    def test_vary(self, tmp_path):
        code = main(["sweep", "fig4", "-o", str(tmp_path), "-j", "2", "--vary", "pump.omega=[30.0, 52.0]",
                     "--points", "5", "--no-adiabaticity", "-q"])
        assert code == EXIT_OK
        summary = json.loads((tmp_path / "sweep_summary.json").read_text())
        assert [r["name"] for r in summary["runs"]] == ["fig4_000", "fig4_001"]
        assert (tmp_path / "fig4_001_report.json").exists()

    def test_many(self, tmp_path):
        code = main(["sweep", "fig9", "fig10", "-o", str(tmp_path), "-j", "1", "--points", "5",
                     "--no-adiabaticity", "-q"])
        assert code == EXIT_OK
        runs = json.loads((tmp_path / "sweep_summary.json").read_text())["runs"]
        assert runs[1]["final_populations"]["f"] > 0.99

    def test_invalid_writes_nothing(self, tmp_path):
        out = tmp_path / "o"
        code = main(["sweep", "fig4", "-o", str(out), "--vary", "pump.omega=[30.0, \"x\"]", "-q"])
        assert code == EXIT_USAGE and not out.exists()


class TestMisc:
    def test_oracle_check(self, tmp_path):
        assert main(["oracle-check", "--points", "12", "-o", str(tmp_path), "-q"]) == EXIT_OK
        assert json.loads((tmp_path / "oracle_check.json").read_text())["passed"]

    def test_usage_error(self):
        assert main(["frobnicate"]) == EXIT_USAGE

    def test_version(self, capsys):
        assert main(["--version"]) == 0
        assert "0.1.0" in capsys.readouterr().out
