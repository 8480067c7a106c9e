import csv
import json

import pytest

from transportcv.cli import (
    REPLICA_COLUMNS,
    SUMMARY_COLUMNS,
    main,
    parse_config,
    run_experiment,
    serialize_config,
)
from transportcv.errors import ConfigError

TINY_CONFIG = """\
# pilot config used by the CLI tests
model = harmonic
forcing = linear_shear
observable = cov
kinds = synchronous
beta = 1.0
dt = 0.005
etas = 0.1
n_steps = 1
n_burnin = 0
replicas = 1
seed = 7
outdir = unused
"""


class TestConfigParsing:
    def test_round_trip_identity(self):
        cfg = parse_config(TINY_CONFIG)
        assert parse_config(serialize_config(cfg)) == cfg

    def test_round_trip_bundled(self):
        from transportcv.cli import _load_config_text

        for name in ("harmonic_sweep", "lj_small"):
            cfg = parse_config(_load_config_text(name))
            assert parse_config(serialize_config(cfg)) == cfg

    def test_round_trip_awkward_floats(self):
        text = TINY_CONFIG.replace("dt = 0.005", "dt = 0.1000000000000001")
        cfg = parse_config(text)
        assert cfg.dt == 0.1000000000000001
        assert parse_config(serialize_config(cfg)) == cfg

    def test_bundled_harmonic_sweep_shape(self):
        from transportcv.cli import _load_config_text

        cfg = parse_config(_load_config_text("harmonic_sweep"))
        assert cfg.etas == (0.1, 0.05, 0.025, 0.01, 0.005)
        assert len(cfg.kinds) == 4

    def test_unknown_key_with_line_number(self):
        text = TINY_CONFIG + "typo_key = 3\n"
        with pytest.raises(ConfigError, match=r"line 14.*typo_key"):
            parse_config(text)

    def test_unknown_param_for_model(self):
        text = TINY_CONFIG + "model.L = 3\n"
        with pytest.raises(ConfigError, match=r"model\.L.*harmonic"):
            parse_config(text)

    def test_missing_required_key(self):
        text = TINY_CONFIG.replace("dt = 0.005\n", "")
        with pytest.raises(ConfigError, match="dt"):
            parse_config(text)

    def test_bad_value_type(self):
        text = TINY_CONFIG.replace("n_steps = 1", "n_steps = soon")
        with pytest.raises(ConfigError, match=r"line 9.*n_steps"):
            parse_config(text)

    def test_duplicate_key(self):
        text = TINY_CONFIG + "beta = 2.0\n"
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config(text)

    def test_unresolvable_model(self):
        text = TINY_CONFIG.replace("model = harmonic", "model = quartic")
        with pytest.raises(ConfigError, match="quartic"):
            parse_config(text)

    def test_zero_eta_rejected(self):
        text = TINY_CONFIG.replace("etas = 0.1", "etas = 0.0")
        with pytest.raises(ConfigError):
            parse_config(text)


class TestRunCommand:
    def test_tiny_run_files_and_exit(self, tmp_path, capsys):
        cfg_path = tmp_path / "tiny.cfg"
        cfg_path.write_text(TINY_CONFIG)
        out = tmp_path / "results"
        rc = main(["run", str(cfg_path), "--outdir", str(out)])
        captured = capsys.readouterr()
        assert rc == 0

        manifest = json.loads(captured.out)
        assert manifest["files"] == ["replicas.csv", "summary.csv", "manifest.json"]
        assert manifest["cells"] == [{"kind": "synchronous", "eta": 0.1, "status": "ok"}]
        assert (out / "manifest.json").exists()

        with (out / "replicas.csv").open() as fh:
            rows = list(csv.reader(fh))
        assert tuple(rows[0]) == REPLICA_COLUMNS
        assert len(rows) == 2  # header + single replica row
        assert rows[1][0] == "synchronous"
        # every numeric cell must parse as a plain float
        for cell in rows[1][1:]:
            float(cell)

        with (out / "summary.csv").open() as fh:
            srows = list(csv.reader(fh))
        assert tuple(srows[0]) == SUMMARY_COLUMNS
        assert srows[1][-1] == "ok"

    def test_rows_sorted_and_deterministic(self, tmp_path):
        text = TINY_CONFIG.replace("kinds = synchronous", "kinds = sticky, synchronous")
        text = text.replace("etas = 0.1", "etas = 0.1, 0.05").replace("n_steps = 1", "n_steps = 50")
        text = text.replace("replicas = 1", "replicas = 2")
        cfg = parse_config(text)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        run_experiment(cfg, outdir=out_a)
        run_experiment(cfg, outdir=out_b)
        assert (out_a / "replicas.csv").read_bytes() == (out_b / "replicas.csv").read_bytes()
        assert (out_a / "summary.csv").read_bytes() == (out_b / "summary.csv").read_bytes()
        with (out_a / "replicas.csv").open() as fh:
            rows = list(csv.reader(fh))[1:]
        keys = [(r[0], float(r[1]), int(r[2])) for r in rows]
        assert keys == sorted(keys)

    def test_missing_config_is_usage_error(self, capsys):
        assert main(["run", "/no/such/config.cfg"]) == 2

    def test_scaled_down_harmonic_sweep_layout(self, tmp_path):
        from transportcv.cli import _load_config_text

        text = _load_config_text("harmonic_sweep")
        text = text.replace("n_steps = 200000", "n_steps = 200")
        text = text.replace("n_burnin = 2000", "n_burnin = 20")
        text = text.replace("replicas = 100", "replicas = 2")
        cfg = parse_config(text)
        run_experiment(cfg, outdir=tmp_path / "sweep")
        with (tmp_path / "sweep" / "summary.csv").open() as fh:
            rows = list(csv.reader(fh))[1:]
        assert len(rows) == 5 * 4  # 5 etas x 4 kinds


class TestOracleCommand:
    def test_ou(self, capsys):
        assert main(["oracle", "ou", "beta=1", "eta=0.1"]) == 0
        out = capsys.readouterr().out.strip()
        assert out.startswith("sigma=[[")
        assert "alpha=0.5" in out
        assert "1.005" in out

    def test_tv_equal_means(self, capsys):
        assert main(["oracle", "tv", "mu1=0,0", "mu2=0,0", "sigma=1"]) == 0
        assert capsys.readouterr().out.strip() == "tv=0.0"

    def test_tv_two_sigma(self, capsys):
        assert main(["oracle", "tv", "distance=2", "sigma=1"]) == 0
        val = float(capsys.readouterr().out.strip().split("=")[1])
        assert val == pytest.approx(0.68269, abs=1e-5)

    def test_unknown_oracle(self, capsys):
        assert main(["oracle", "laplace"]) == 2


class TestCheckCommand:
    def test_fast_level_passes(self, capsys):
        assert main(["check", "--level", "fast"]) == 0
        out = capsys.readouterr().out
        lines = [ln for ln in out.splitlines() if ln.startswith("[")]
        assert len(lines) >= 5
        assert all(ln.startswith("[PASS]") for ln in lines)

    def test_deterministic_across_invocations(self):
        from transportcv.checks import run_checks

        a = [(r.name, r.passed, r.detail) for r in run_checks("fast")]
        b = [(r.name, r.passed, r.detail) for r in run_checks("fast")]
        assert a == b


class TestBundledLJPilot:
    def test_lj_small_completes_without_blowups(self, tmp_path, capsys):
        # the bundled desk-scale pilot really runs: all cells valid, no blow-ups
        rc = main(["run", "lj_small", "--outdir", str(tmp_path / "lj")])
        captured = capsys.readouterr()
        assert rc == 0
        manifest = json.loads(captured.out)
        assert all(c["status"] == "ok" for c in manifest["cells"])
        with (tmp_path / "lj" / "replicas.csv").open() as fh:
            rows = list(csv.reader(fh))[1:]
        assert len(rows) == 3 * 2 * 4  # kinds x etas x replicas
        assert all(r[-1] == "0" for r in rows)  # blowup column

    def test_invalid_cells_exit_nonzero(self, tmp_path, capsys):
        # dt far above the stability threshold blows up the harmonic chain
        text = TINY_CONFIG.replace("dt = 0.005", "dt = 3.0").replace("n_steps = 1", "n_steps = 3000")
        cfg_path = tmp_path / "bad.cfg"
        cfg_path.write_text(text)
        rc = main(["run", str(cfg_path), "--outdir", str(tmp_path / "bad")])
        capsys.readouterr()
        assert rc == 1
