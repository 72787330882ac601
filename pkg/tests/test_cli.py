import csv
from pathlib import Path

import pytest

from freeutility import cli, conjugate
from freeutility.config import ConfigError, parse_config, parse_text
from freeutility.runner import CSV_COLUMNS, cells

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
SUBCOMMAND = {"control": "solve-control", "estimate": "estimate", "bcr": "bcr", "gvp": "gvp"}

MINIMAL = """\
config_version: 1
kind: control
control:
  actions: 2
  environment:
    "*": [0.5, 0.5]
"""


def write(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestParse:
    def test_minimal_defaults(self, tmp_path):
        cfg = parse_config(write(tmp_path, MINIMAL))
        assert cfg.alphas == (1.0,) and cfg.seeds == (0,) and cfg.horizon == 1
        assert cfg.section["reference"].rows["*"].tolist() == [0.5, 0.5]

    def test_bad_row_named(self, tmp_path):
        text = MINIMAL.replace("[0.5, 0.5]", "[0.5, 0.4]")
        with pytest.raises(ConfigError, match=r"cfg.yaml:6: control\.environment\.\*: row sums to 0\.9"):
            parse_config(write(tmp_path, text))

    def test_bad_matrix_row_named(self):
        text = ("kind: bcr\nbcr:\n  environment: finite-mdp\n  transitions:\n"
                "    - [[[1, 0], [0.5, 0.4]]]\n")
        with pytest.raises(ConfigError, match=r"row \[0, 0, 1\] sums to 0\.9"):
            parse_text(text)

    def test_unknown_key_lists_valid(self):
        with pytest.raises(ConfigError, match="valid keys are: .*environment"):
            parse_text(MINIMAL + "  colour: red\n")

    def test_sweep_schedules_four(self):
        cfg = parse_text(MINIMAL + 'alpha: "0.001,0.1,1,10"\n')
        assert cfg.alphas == (0.001, 0.1, 1.0, 10.0)
        assert len(cells(cfg)) == 4

    def test_seed_range(self):
        assert parse_text(MINIMAL + 'seeds: "0-4"\n').seeds == (0, 1, 2, 3, 4)

    def test_empty_sweep(self):
        with pytest.raises(ConfigError, match="non-empty"):
            parse_text(MINIMAL + "alpha: []\n")

    def test_version(self):
        with pytest.raises(ConfigError, match="config_version"):
            parse_text(MINIMAL.replace("config_version: 1", "config_version: 2"))

    def test_unresolved_name(self):
        with pytest.raises(ConfigError, match="unknown symbol"):
            parse_text(MINIMAL + "  reward_action:\n    \"*\": {up: 1}\n")

    def test_set_override(self):
        cfg = parse_text(MINIMAL, overrides=["horizon=3", "control.actions=[a, b, c]",
                                             "control.environment={'*': [1, 0]}"])
        assert cfg.horizon == 3 and cfg.section["actions"].symbols == ("a", "b", "c")

    @pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.yaml")), ids=lambda p: p.name)
    def test_shipped_configs_parse(self, path):
        parse_config(path)


class TestRun:
    def test_columns_and_order(self, tmp_path):
        out = tmp_path / "r.csv"
        assert cli.main(["solve-control", "--config", str(write(tmp_path, MINIMAL)),
                         "--alpha", "10,0.1,1", "--seed", "1,0", "--out", str(out)]) == 0
        rows = read_rows(out)
        assert tuple(rows[0]) == CSV_COLUMNS
        keys = [(float(r[2]), int(r[3]), r[4]) for r in rows[1:]]
        assert keys == sorted(keys) and len(keys) == 3 * 2 * 3
        assert {r[4] for r in rows[1:]} == {"expected_utility", "kl_cost", "objective"}

    def test_bcr_metrics(self, tmp_path):
        out = tmp_path / "b.csv"
        cli.main(["bcr", "--config", str(CONFIGS / "bcr_bandit.yaml"), "--horizon", "50",
                  "--seed", "0-2", "--out", str(out)])
        assert {r[4] for r in read_rows(out)[1:]} == {"cum_regret", "cum_reward", "posterior_truth_mass"}

    def test_log_base(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        cfg = str(write(tmp_path, MINIMAL + "  reward_action: {'*': [1, 0]}\n"))
        cli.main(["solve-control", "--config", cfg, "--out", str(a)])
        cli.main(["solve-control", "--config", cfg, "--out", str(b), "--log-base", "e"])
        kl = [float(r[5]) for r in read_rows(a)[1:] if r[4] == "kl_cost"][0]
        kl_e = [float(r[5]) for r in read_rows(b)[1:] if r[4] == "kl_cost"][0]
        assert kl_e == pytest.approx(kl * 0.6931471805599453)

    @pytest.mark.parametrize("name", ["control_sweep", "estimate_coin", "bcr_mdp", "gvp_signal"])
    def test_byte_identical(self, tmp_path, name):
        cfg = CONFIGS / f"{name}.yaml"
        kind = parse_config(cfg).kind
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        extra = ["--horizon", "30"] if kind in ("bcr", "estimate") else []
        assert cli.main([SUBCOMMAND[kind], "--config", str(cfg), "--out", str(a)] + extra) == 0
        assert cli.main([SUBCOMMAND[kind], "--config", str(cfg), "--out", str(b), "--jobs", "2"] + extra) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_config_error_exit(self, tmp_path, capsys):
        bad = write(tmp_path, MINIMAL.replace("[0.5, 0.5]", "[0.5, 0.4]"))
        assert cli.main(["solve-control", "--config", str(bad)]) == 2
        assert "row sums to 0.9" in capsys.readouterr().err

    def test_kind_mismatch(self, tmp_path):
        assert cli.main(["estimate", "--config", str(write(tmp_path, MINIMAL))]) == 2

    def test_capacity_exit(self, tmp_path, capsys):
        assert cli.main(["solve-control", "--config", str(write(tmp_path, MINIMAL)), "--horizon", "12"]) == 3
        assert "table entries" in capsys.readouterr().err

    def test_summary(self, tmp_path, capsys):
        cli.main(["gvp", "--config", str(CONFIGS / "gvp_signal.yaml"), "--summary",
                  "--out", str(tmp_path / "g.csv")])
        out = capsys.readouterr().out
        assert "objective" in out and "kl_cost" in out


class TestVerify:
    def test_healthy(self, tmp_path, capsys):
        out = tmp_path / "v.csv"
        code = cli.main(["verify", "--scale", "0.05", "--suite", "conjugacy", "--suite", "gvp",
                         "--out", str(out)])
        assert code == 0
        report = capsys.readouterr().out
        assert "[PASS] conjugacy" in report and " s)" in report
        metrics = [r[4] for r in read_rows(out)[1:]]
        assert "max_violation/conjugacy.roundtrip_measure" in metrics

    def test_mutation_fails(self, monkeypatch, tmp_path, capsys):
        original = conjugate._log2_partition
        monkeypatch.setattr(conjugate, "_log2_partition", lambda u, a: original(u, a) + 1e-3)
        code = cli.main(["verify", "--scale", "0.05", "--suite", "conjugacy",
                         "--out", str(tmp_path / "v.csv")])
        assert code != 0
        assert "[FAIL] conjugacy" in capsys.readouterr().out
