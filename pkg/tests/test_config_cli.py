from __future__ import annotations

import csv
import json

import pytest

from regimelab.cli import main
from regimelab.config import load_config, parse_config
from regimelab.errors import ConfigParse, ModelInvalid

GOOD = """states = 2
rates = [0.0, 1.0,
         1.0, 0.0]
mu = [0.0, 0.05]
sigma = [0.1, 0.3]
x0 = 100.0
T = 1.0
N = 256
"""
SMALL = ["--trials", "10000", "--n-grid", "16,32,64", "--paths", "2"]


def _write(tmp_path, text, name="model.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


class TestConfig:
    def test_default(self):
        cfg = load_config()
        assert cfg.generator.d == 2 and cfg.grid.N == 1024
        assert cfg.family.kind.value == "binomial" and cfg.convention.value == "end"
        assert len(cfg.digest) == 64

    def test_rates_length(self):
        bad = GOOD.replace("1.0, 0.0]", "1.0]")
        with pytest.raises(ConfigParse) as exc:
            parse_config(bad)
        assert exc.value.key == "rates" and exc.value.line == 2

    @pytest.mark.parametrize("edit,key", [
        (("N = 256", "N = 256\nbogus = 1"), "bogus"),
        (('N = 256', 'N = 256\nfamily = "pentanomial"'), "family"),
        (('N = 256', 'N = 256\nconvention = "middle"'), "convention"),
        (("N = 256", "N = 0"), "N"),
        (("mu = [0.0, 0.05]", "mu = [0.0]"), "mu"),
        (("x0 = 100.0", 'x0 = "a"'), "x0"),
    ])
    def test_errors_name_key(self, edit, key):
        with pytest.raises(ConfigParse) as exc:
            parse_config(GOOD.replace(*edit))
        assert exc.value.key == key and exc.value.line is not None

    def test_missing_key(self):
        with pytest.raises(ConfigParse) as exc:
            parse_config(GOOD.replace("T = 1.0\n", ""))
        assert exc.value.key == "T"

    def test_invalid_model(self):
        with pytest.raises(ModelInvalid):
            parse_config(GOOD.replace("rates = [0.0, 1.0,", "rates = [0.0, -1.0,"))


class TestCli:
    def test_config_error_exit(self, tmp_path, capsys):
        path = _write(tmp_path, GOOD.replace("1.0, 0.0]", "1.0]"))
        assert main(["simulate", "--config", path, "--out", str(tmp_path / "o")]) == 2
        err = capsys.readouterr().err
        assert "rates" in err and "line 2" in err

    def test_model_error_exit(self, tmp_path):
        path = _write(tmp_path, GOOD.replace("1.0, 0.0]", "0.0, 0.0]"))
        assert main(["simulate", "--config", path, "--out", str(tmp_path / "o")]) == 3

    def test_io_error_exit(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        assert main(["simulate", "--paths", "1", "--out", str(blocker / "sub")]) == 4

    def test_simulate_outputs(self, tmp_path):
        out = tmp_path / "sim"
        assert main(["simulate", "--paths", "3", "--out", str(out)]) == 0
        with open(out / "paths.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["trial", "jump_index", "tau", "state"]
        assert {r[0] for r in rows[1:]} == {"0", "1", "2"}
        with open(out / "limit_samples.csv") as fh:
            assert next(csv.reader(fh)) == ["trial", "time", "u", "x"]
        with open(out / "discrete_paths.csv") as fh:
            assert next(csv.reader(fh)) == ["trial", "k", "state", "u"]
        manifest = json.loads((out / "manifest.json").read_text())
        assert set(manifest["files"]) == {"paths.csv", "limit_samples.csv", "discrete_paths.csv"}
        assert manifest["seed"] == 12345

    def test_output_dir_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("OUTPUT_DIR", str(tmp_path / "env"))
        assert main(["simulate", "--paths", "1"]) == 0
        assert (tmp_path / "env" / "manifest.json").exists()

    def test_failing_tolerance_continues(self, tmp_path):
        # a band factor of 1 cannot be met; the remaining checks still run
        out = tmp_path / "conv"
        code = main(["converge", *SMALL, "--tolerance", "cf_rate_band=1", "--out", str(out)])
        assert code == 1
        with open(out / "summary.csv") as fh:
            rows = {r["check"]: r["pass"] for r in csv.DictReader(fh)}
        assert rows["cf_rate"] == "false"
        assert rows["kernel"] == "true" and "tightness" in rows
        for name in rows:
            assert (out / f"{name}.json").exists() and (out / f"{name}.csv").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["pass"] is False and manifest["tolerances"]["cf_rate_band"] == 1.0

    def test_too_few_trials(self, tmp_path):
        assert main(["converge", "--trials", "100", "--out", str(tmp_path / "o")]) == 2

    def test_price_small(self, tmp_path):
        out = tmp_path / "price"
        main(["price", *SMALL, "--out", str(out)])
        with open(out / "summary.csv") as fh:
            assert [r["check"] for r in csv.DictReader(fh)] == ["pricing"]

    def test_bad_tolerance_name(self):
        with pytest.raises(SystemExit):
            main(["price", "--tolerance", "nope=1"])

    def test_version(self, capsys):
        with pytest.raises(SystemExit):
            main(["--version"])
        assert "0.1.0" in capsys.readouterr().out
