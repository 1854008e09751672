import hashlib
import json
from pathlib import Path

import pytest

from hatchsens import cli
from hatchsens.config import ConfigError, load_config, semantic_errors
from hatchsens.persist import read_ndjson

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write_config(tmp_path, body: str) -> Path:
    path = tmp_path / "run.toml"
    path.write_text(body, encoding="utf-8")
    return path


SHORT_RUN = """
[run]
label = "short"
seed = 9
mode = "batch"
max_duration_s = 600
log_frames = false

[culture]
volume_l = 2.0
cysts_g = 1.0
salinity_ppt = {salinity}

[attest]
aerator_on = {aerator}

[plant]
preset = "ideal"

[[nodes]]
addr = 1
sampling_interval_s = 60
"""


def short_run_config(tmp_path, salinity=6.5, aerator="true"):
    return write_config(tmp_path, SHORT_RUN.format(salinity=salinity, aerator=aerator))


def dir_digest(path: Path) -> str:
    h = hashlib.sha256()
    for f in sorted(path.rglob("*")):
        if f.is_file():
            h.update(f.name.encode())
            h.update(f.read_bytes())
    return h.hexdigest()


class TestLoadConfig:
    def test_shipped_configs_parse_clean(self):
        for name in ("ideal", "noisy", "cold-room", "aerator-failure", "live-demo"):
            cfg, errors = load_config(CONFIGS / f"{name}.toml")
            assert errors == [], name
            assert semantic_errors(cfg) == [], name

    def test_toml_syntax_error(self, tmp_path):
        path = write_config(tmp_path, "[run\nseed = 1")
        with pytest.raises(ConfigError) as exc:
            load_config(path)
        assert "line" in str(exc.value)

    def test_duplicate_addr_is_structural(self, tmp_path):
        path = write_config(
            tmp_path,
            SHORT_RUN.format(salinity=6.5, aerator="true") + "\n[[nodes]]\naddr = 1\n",
        )
        _, errors = load_config(path)
        assert any("duplicate node addr 0x0001" in e for e in errors)

    def test_reserved_addr_rejected(self, tmp_path):
        path = write_config(
            tmp_path, SHORT_RUN.format(salinity=6.5, aerator="true").replace("addr = 1", "addr = 0")
        )
        _, errors = load_config(path)
        assert any("reserved" in e for e in errors)

    def test_missing_seed(self, tmp_path):
        path = write_config(tmp_path, "[run]\nlabel='x'\n[[nodes]]\naddr = 1\n")
        _, errors = load_config(path)
        assert any("seed" in e for e in errors)

    def test_threshold_overrides_apply(self, tmp_path):
        body = SHORT_RUN.format(salinity=6.5, aerator="true") + (
            "\n[thresholds.temperature]\nhard_lo = 10.0\nsoft_lo = 20.0\n"
            "soft_hi = 30.0\nhard_hi = 40.0\n"
        )
        cfg, errors = load_config(write_config(tmp_path, body))
        assert errors == []
        assert cfg.thresholds.temperature.soft_lo == 20.0
        assert cfg.thresholds.ph.soft_lo == 7.2  # untouched default


class TestValidateCommand:
    def test_shipped_config_ok(self, capsys):
        assert cli.main(["validate", str(CONFIGS / "ideal.toml")]) == 0
        assert "ok" in capsys.readouterr().out

    def test_low_salinity_exits_2(self, tmp_path, capsys):
        path = short_run_config(tmp_path, salinity=4.0)
        assert cli.main(["validate", str(path)]) == 2
        err = capsys.readouterr().err
        assert "salinity" in err and "[5.0, 8.0]" in err

    def test_duplicate_addr_exits_2(self, tmp_path, capsys):
        path = write_config(
            tmp_path,
            SHORT_RUN.format(salinity=6.5, aerator="true") + "\n[[nodes]]\naddr = 1\n",
        )
        assert cli.main(["validate", str(path)]) == 2
        assert "0x0001" in capsys.readouterr().err

    def test_parse_error_exits_2(self, tmp_path):
        assert cli.main(["validate", str(write_config(tmp_path, "= nonsense"))]) == 2


class TestRunCommand:
    def test_short_run_exits_0(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = cli.main(
            ["run", "--config", str(short_run_config(tmp_path)), "--out", str(out)]
        )
        assert code == 0
        for name in (
            "manifest.json", "readings.ndjson", "alerts.ndjson",
            "phases.ndjson", "commands.ndjson", "report.json",
        ):
            assert (out / name).exists(), name

    def test_bad_salinity_runs_to_gate_and_exits_3(self, tmp_path):
        out = tmp_path / "out"
        path = short_run_config(tmp_path, salinity=9.0)
        code = cli.main(["run", "--config", str(path), "--out", str(out)])
        assert code == 3
        phases = read_ndjson(out / "phases.ndjson")
        assert [p["phase"] for p in phases if p["type"] == "phase"] == ["culture_prep"]
        assert not (out / "report.json").exists()  # analysis never reached

    def test_unattested_aerator_exits_3(self, tmp_path):
        out = tmp_path / "out"
        path = short_run_config(tmp_path, aerator="false")
        assert cli.main(["run", "--config", str(path), "--out", str(out)]) == 3
        phases = read_ndjson(out / "phases.ndjson")
        assert [p["phase"] for p in phases if p["type"] == "phase"] == [
            "culture_prep", "aeration_on",
        ]

    def test_seed_override_changes_outputs(self, tmp_path):
        body = SHORT_RUN.format(salinity=6.5, aerator="true").replace(
            'preset = "ideal"', 'preset = "noisy"'
        )
        path = write_config(tmp_path, body)
        outs = {}
        for seed in (1, 2):
            out = tmp_path / f"out{seed}"
            assert cli.main(["run", "--config", str(path), "--seed", str(seed),
                             "--out", str(out)]) == 0
            outs[seed] = (out / "readings.ndjson").read_bytes()
        assert outs[1] != outs[2]

    def test_hatchsens_out_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("HATCHSENS_OUT", str(tmp_path / "envout"))
        code = cli.main(["run", "--config", str(short_run_config(tmp_path))])
        assert code == 0
        assert any((tmp_path / "envout").iterdir())

    def test_config_parse_failure_exits_2(self, tmp_path):
        path = write_config(tmp_path, "[[nodes]]\naddr = 1\naddr = 2\n")
        assert cli.main(["run", "--config", str(path)]) == 2


class TestReplayReportCommands:
    @pytest.fixture
    def run_dir(self, tmp_path):
        out = tmp_path / "out"
        assert cli.main(
            ["run", "--config", str(short_run_config(tmp_path)), "--out", str(out)]
        ) == 0
        return out

    def test_replay_does_not_mutate(self, run_dir, capsys):
        before = dir_digest(run_dir)
        assert cli.main(["replay", str(run_dir)]) == 0
        assert dir_digest(run_dir) == before
        assert "replayed" in capsys.readouterr().out

    def test_replay_empty_dir_exits_4(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert cli.main(["replay", str(empty)]) == 4

    def test_report_json_matches_stored(self, run_dir, capsys):
        assert cli.main(["report", str(run_dir)]) == 0
        emitted = capsys.readouterr().out
        assert emitted == (run_dir / "report.json").read_text()

    def test_report_markdown_sections(self, run_dir, capsys):
        assert cli.main(["report", str(run_dir), "--format", "md"]) == 0
        md = capsys.readouterr().out
        for section in (
            "## Water", "## Oxygen", "## pH", "## Illumination", "## Temperature",
            "## Humidity", "## Aeration", "## Salinity", "## Density of cysts",
            "## Incubation time",
        ):
            assert section in md

    def test_report_missing_dir_exits_4(self, tmp_path):
        assert cli.main(["report", str(tmp_path / "nope")]) == 4

    def test_truncated_readings_line_reported(self, run_dir):
        # corrupt the final line (no newline, half a record)
        readings = run_dir / "readings.ndjson"
        content = readings.read_text().rstrip("\n")
        readings.write_text(content[: len(content) - 5], encoding="utf-8")
        assert cli.main(["replay", str(run_dir)]) == 4
