import pytest

from twinmill import cli, modal
from twinmill.config import config_to_json, default_config_dict
from twinmill.pathplan import program_from_csv

SLOT_GCODE = "G1 X40 F300\nG3 X40 Y40 J20\nG1 X0\n"
WORK_OFFSET = "2105,-20,1100"


@pytest.fixture
def config_file(tmp_path):
    p = tmp_path / "system.json"
    p.write_text(config_to_json(default_config_dict()))
    return str(p)


@pytest.fixture
def gcode_file(tmp_path):
    p = tmp_path / "slot.gcode"
    p.write_text(SLOT_GCODE)
    return str(p)


def read_rms(path):
    for line in path.read_text().splitlines():
        if line.startswith("# rms_m="):
            return float(line.split("=", 1)[1])
    raise AssertionError("no rms in report")


class TestUsage:
    def test_no_arguments(self):
        assert cli.main([]) == 64

    def test_unknown_command(self):
        assert cli.main(["mill"]) == 64

    def test_help_exits_zero(self):
        assert cli.main(["--help"]) == 0

    def test_missing_config(self, tmp_path, monkeypatch):
        monkeypatch.delenv(cli.CONFIG_ENV_VAR, raising=False)
        code = cli.main(["modal", "--tensions", "0,500", "--out", str(tmp_path / "o")])
        assert code == 64


class TestConfigHandling:
    def test_env_var_fallback(self, tmp_path, config_file, monkeypatch):
        monkeypatch.setenv(cli.CONFIG_ENV_VAR, config_file)
        out = tmp_path / "modal_out"
        code = cli.main(["modal", "--tensions", "0,500,1400,2000", "--out", str(out)])
        assert code == 0
        assert (out / "shift_fit_x.csv").exists()

    def test_flag_beats_env(self, tmp_path, config_file, monkeypatch):
        monkeypatch.setenv(cli.CONFIG_ENV_VAR, str(tmp_path / "missing.json"))
        out = tmp_path / "o"
        code = cli.main(
            ["--config", config_file, "modal", "--tensions", "0,2000", "--out", str(out)]
        )
        assert code == 0

    def test_bad_config_exits_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"schema_version": 1}')
        code = cli.main(
            ["--config", str(bad), "modal", "--tensions", "0,500", "--out", str(tmp_path / "o")]
        )
        assert code == 2

    def test_missing_config_file_exits_2(self, tmp_path):
        code = cli.main(
            ["--config", str(tmp_path / "none.json"), "modal", "--tensions", "0,500",
             "--out", str(tmp_path / "o")]
        )
        assert code == 2


class TestModal:
    def test_writes_frfs_and_fit(self, tmp_path, config_file, capsys):
        out = tmp_path / "modal_out"
        code = cli.main(
            ["--config", config_file, "modal", "--tensions", "0,500,1400,2000",
             "--out", str(out)]
        )
        assert code == 0
        for T in ("0", "500", "1400", "2000"):
            assert (out / f"frf_x_{T}N.csv").exists()
        text = (out / "shift_fit_x.csv").read_text()
        slope = float(
            [l for l in text.splitlines() if l.startswith("# slope")][0].split("=")[1]
        )
        assert slope == pytest.approx(0.0226, rel=0.02)
        assert "slope=" in capsys.readouterr().out

    def test_single_tension_exits_3(self, tmp_path, config_file):
        code = cli.main(
            ["--config", config_file, "modal", "--tensions", "1000", "--out", str(tmp_path / "o")]
        )
        assert code == 3

    def test_empty_tensions_exits_64(self, tmp_path, config_file):
        code = cli.main(
            ["--config", config_file, "modal", "--tensions", ",", "--out", str(tmp_path / "o")]
        )
        assert code == 64


class TestFrf:
    def test_h1_from_impacts(self, tmp_path, config_file):
        model = modal.ModalModel("x", 60.0, 0.015, 159.0, 0.0226)
        files = []
        for i in range(2):
            rec = modal.simulate_impact(model, 500.0, sample_rate=2048.0, duration=2.0)
            p = tmp_path / f"impact{i}.csv"
            p.write_text(modal.impact_record_to_csv(rec))
            files.append(str(p))
        out = tmp_path / "frf.csv"
        code = cli.main(["frf", *files, "--out", str(out)])
        assert code == 0
        frf = modal.frf_from_csv(out.read_text())
        peaks = modal.peak_pick(frf, 100.0, 300.0)
        assert len(peaks) == 1
        assert peaks[0][0] == pytest.approx(159.0 + 0.0226 * 500.0, abs=0.5)

    def test_mismatched_records_exit_3(self, tmp_path):
        model = modal.ModalModel("x", 60.0, 0.015, 159.0, 0.0226)
        files = []
        for i, T in enumerate((0.0, 500.0)):
            rec = modal.simulate_impact(model, T, sample_rate=2048.0, duration=1.0)
            p = tmp_path / f"impact{i}.csv"
            p.write_text(modal.impact_record_to_csv(rec))
            files.append(str(p))
        assert cli.main(["frf", *files, "--out", str(tmp_path / "frf.csv")]) == 3


class TestPlan:
    def test_plan_gcode(self, tmp_path, config_file, gcode_file):
        out = tmp_path / "program.csv"
        code = cli.main(
            ["--config", config_file, "plan", gcode_file, "--tension", "1000",
             "--work-offset-mm", WORK_OFFSET, "--out", str(out)]
        )
        assert code == 0
        program = program_from_csv(out.read_text())
        assert len(program.pairs) > 10
        assert program.tension.force[0] == 1000.0

    def test_plan_outside_workspace_exits_3(self, tmp_path, config_file, gcode_file):
        code = cli.main(
            ["--config", config_file, "plan", gcode_file, "--out", str(tmp_path / "p.csv")]
        )
        assert code == 3

    def test_bad_work_offset_exits_64(self, tmp_path, config_file, gcode_file):
        code = cli.main(
            ["--config", config_file, "plan", gcode_file, "--work-offset-mm", "1,2",
             "--out", str(tmp_path / "p.csv")]
        )
        assert code == 64

    def test_missing_path_file_exits_3(self, tmp_path, config_file):
        code = cli.main(
            ["--config", config_file, "plan", str(tmp_path / "none.gcode"),
             "--out", str(tmp_path / "p.csv")]
        )
        assert code == 3


class TestDeform:
    @pytest.fixture
    def program_file(self, tmp_path, config_file, gcode_file):
        out = tmp_path / "program.csv"
        assert cli.main(
            ["--config", config_file, "plan", gcode_file, "--tension", "1000",
             "--work-offset-mm", WORK_OFFSET, "--out", str(out)]
        ) == 0
        return str(out)

    def test_deform_and_compensate(self, tmp_path, config_file, program_file):
        out = tmp_path / "deform_out"
        code = cli.main(
            ["--config", config_file, "deform", program_file, "--compensate",
             "--noise-sigma", "15e-6", "--seed", "7", "--out", str(out)]
        )
        assert code == 0
        before = read_rms(out / "residual_before.csv")
        after = read_rms(out / "residual_after.csv")
        assert before > 1e-4
        assert after < 5e-5

    def test_noise_without_seed_exits_64(self, tmp_path, config_file, program_file):
        code = cli.main(
            ["--config", config_file, "deform", program_file, "--noise-sigma", "1e-5",
             "--out", str(tmp_path / "o")]
        )
        assert code == 64
