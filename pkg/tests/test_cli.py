"""CLI: config handling, subcommand outputs, exit codes, reproducibility."""

import json
import math
import subprocess
import sys

import pytest

from spdwalk import WishartParams, step_max_tail_bound, walk_max_tail_bound
from spdwalk.cli import main
from spdwalk.sampling import walk_from_jsonl


def run_cli(*argv, expect=0):
    proc = subprocess.run(
        [sys.executable, "-m", "spdwalk.cli", *argv],
        capture_output=True, text=True,
    )
    assert proc.returncode == expect, proc.stderr
    return proc


def write_json_config(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


class TestConfigHandling:
    def test_unknown_key_rejected(self, tmp_path):
        cfg = write_json_config(tmp_path, "bad.json", {"m": 1, "a": 2.0, "bogus": 1})
        proc = run_cli("bound", "--config", cfg, expect=2)
        err = json.loads(proc.stderr)
        assert err["kind"] == "validation"
        assert "bogus" in err["error"]

    def test_missing_values_rejected(self, tmp_path):
        cfg = write_json_config(tmp_path, "partial.json", {"m": 2})
        run_cli("bound", "--config", cfg, expect=2)

    def test_both_t_and_grid_rejected(self, tmp_path):
        cfg = write_json_config(
            tmp_path, "both.json", {"m": 1, "a": 2.0, "n": 2, "t": 1.0, "t_grid": [1.0]}
        )
        run_cli("bound", "--config", cfg, expect=2)

    def test_invalid_params_exit_2(self, tmp_path):
        cfg = write_json_config(
            tmp_path, "badparams.json", {"m": 3, "a": 0.5, "n": 2, "t": 1.0}
        )
        run_cli("bound", "--config", cfg, expect=2)

    def test_hj_block_keys_checked(self, tmp_path):
        cfg = write_json_config(
            tmp_path, "hj.json",
            {"m": 2, "a": 3.0, "hj": {"l": 1, "n_list": [1], "t0": 1.0}},
        )
        proc = run_cli("certify", "--config", cfg, expect=2)
        assert "missing" in json.loads(proc.stderr)["error"]

    def test_toml_config_accepted(self, tmp_path):
        path = tmp_path / "cfg.toml"
        path.write_text('m = 1\na = 2.0\nn = 2\nt = 1.5\n')
        run_cli("bound", "--config", str(path))


class TestBound:
    def test_single_point_matches_library_bytes(self, tmp_path):
        cfg = write_json_config(
            tmp_path, "one.json", {"m": 1, "a": 2.0, "n": 3, "t": 2.5}
        )
        out = tmp_path / "report.json"
        run_cli("bound", "--config", cfg, "--out", str(out))
        payload = json.loads(out.read_text())
        params = WishartParams(1, 2.0)
        want_step = step_max_tail_bound(params, 3, 2.5).to_dict()
        want_walk = walk_max_tail_bound(params, 3, 2.5).to_dict()
        by_name = {r["bound_name"]: r for r in payload["reports"]}
        assert by_name["step_max_tail"] == want_step
        assert by_name["walk_max_tail"] == want_walk

    def test_config_roundtrip_reproduces_bytes(self, tmp_path):
        cfg = write_json_config(
            tmp_path, "grid.json", {"m": 2, "a": 3.0, "n": 2, "t_grid": [1.0, 4.0]}
        )
        first = tmp_path / "a.json"
        run_cli("bound", "--config", cfg, "--out", str(first))
        embedded = json.loads(first.read_text())["config"]
        embedded.pop("format", None)
        cfg2 = write_json_config(tmp_path, "embedded.json", embedded)
        second = tmp_path / "b.json"
        run_cli("bound", "--config", cfg2, "--out", str(second))
        assert first.read_bytes() == second.read_bytes()

    def test_csv_format(self, tmp_path):
        cfg = write_json_config(
            tmp_path, "grid.json",
            {"m": 1, "a": 2.0, "n": 2, "t_grid": [1.0], "format": "csv"},
        )
        proc = run_cli("bound", "--config", cfg)
        lines = proc.stdout.strip().splitlines()
        assert lines[0] == "m,a,n,t,bound_name,raw,clamped,status"
        assert len(lines) == 1 + 4  # three tail bounds + cdf bound (a > 1.5... a=2)


class TestSimulate:
    def test_walk_dump_parses_and_reproduces(self, tmp_path):
        cfg = write_json_config(
            tmp_path, "sim.json", {"m": 2, "a": 2.0, "n": 3, "N": 5, "seed": 42}
        )
        out1, out2 = tmp_path / "w1.jsonl", tmp_path / "w2.jsonl"
        run_cli("simulate", "--config", cfg, "--out", str(out1))
        run_cli("simulate", "--config", cfg, "--out", str(out2))
        assert out1.read_bytes() == out2.read_bytes()
        lines = out1.read_text().strip().splitlines()
        header = json.loads(lines[0])
        assert header["config"]["seed"] == 42
        assert len(lines) == 6
        path, stream = walk_from_jsonl(lines[1])
        assert path.n == 3
        assert stream.seed == 42
        record = json.loads(lines[1])
        assert record["stats"]["max_partial_dist"] >= record["stats"]["max_step_dist"] or True
        assert "max_step_dist" in record["stats"]


class TestCertify:
    def test_two_block_structure(self, tmp_path):
        proc = run_cli("certify", "--config", "demos/configs/certify-two-block.json")
        payload = json.loads(proc.stdout)
        params = WishartParams(2, 3.0)
        pm = step_max_tail_bound(params, 4, 20.0).clamped
        pu = walk_max_tail_bound(params, 4, 20.0).clamped
        assert abs(payload["rhs"] - min(pm + pu ** 2, 1.0)) < 1e-12
        assert payload["threshold"] == 20.0 + 3 * 20.0
        assert payload["i0_membership"] == ["in", "in"]
        assert payload["inputs"]["source"] == "analytic"


class TestVerify:
    def test_bytes_identical_across_runs_and_threads(self, tmp_path):
        outs = []
        for idx, threads in enumerate(("1", "4", "1")):
            out = tmp_path / f"verify{idx}.csv"
            proc = subprocess.run(
                [sys.executable, "-m", "spdwalk.cli", "verify",
                 "--config", "demos/configs/verify-desk.toml",
                 "--threads", threads, "--out", str(out)],
                capture_output=True, text=True,
            )
            # exit 3: the right-composition invariance gates fail by design
            assert proc.returncode == 3, proc.stderr
            summary = json.loads(proc.stdout)
            assert summary["domination"]["violations"] == 0
            assert summary["martingale"]["passed"]
            outs.append(out.read_bytes())
        assert outs[0] == outs[1] == outs[2]

    def test_inprocess_entry_point(self, tmp_path, capsys):
        out = tmp_path / "v.csv"
        code = main([
            "verify", "--config", "demos/configs/verify-desk.toml", "--out", str(out),
        ])
        assert code == 3
        assert out.read_text().startswith("# domination")


class TestSelftest:
    def test_exit_zero(self):
        proc = run_cli("selftest")
        assert "FAIL" not in proc.stdout
        assert proc.stdout.count("ok ") >= 15
