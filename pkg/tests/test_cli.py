"""Tests for the command-line front end: spec validation, dispatch, report
determinism, file emission, and exit codes."""

import json
import os

import pytest

from difflab.cli import (
    COMMANDS,
    SpecError,
    emit_report,
    load_spec,
    main,
    run_command,
)


class TestLoadSpec:
    def test_minimal_dict_gets_defaults(self):
        spec = load_spec({"cmd": "metrics"})
        assert spec.cmd == "metrics"
        assert spec.params["r"] == "1"
        assert spec.grid_N >= 64
        assert spec.formats == ("json",)

    def test_unknown_top_level_key(self):
        with pytest.raises(SpecError, match="bogus"):
            load_spec({"cmd": "metrics", "bogus": 1})

    def test_unknown_param_key_names_path(self):
        with pytest.raises(SpecError, match="params.bogus"):
            load_spec({"cmd": "metrics", "params": {"bogus": 1}})

    def test_unknown_command(self):
        with pytest.raises(SpecError, match="cmd"):
            load_spec({"cmd": "frobnicate"})

    def test_version_mismatch(self):
        with pytest.raises(SpecError, match="version"):
            load_spec({"cmd": "flow", "version": 99})

    def test_bad_tolerance(self):
        with pytest.raises(SpecError, match="tol"):
            load_spec({"cmd": "flow", "tol": -1.0})

    def test_missing_file(self):
        with pytest.raises(SpecError, match="does not exist"):
            load_spec("/nonexistent/spec.json")

    def test_nested_composition_accepted(self):
        spec = load_spec({
            "cmd": "metrics",
            "params": {
                "f": {"kind": "compose", "maps": [
                    {"kind": "moebius", "a": 2},
                    {"kind": "inverse", "of": {
                        "kind": "iterate", "n": 2,
                        "of": {"kind": "moebius", "a": 1.5}}},
                ]},
                "g": {"kind": "identity"},
            },
        })
        report = run_command(spec)
        assert report["exit_code"] == 0
        assert report["report"]["d"] > 0.0

    def test_bad_nested_kind_names_path(self):
        with pytest.raises(SpecError, match="params.f.maps"):
            run_command(load_spec({
                "cmd": "metrics",
                "params": {"f": {"kind": "compose",
                                 "maps": [{"kind": "nope"}]}},
            }))


class TestRunCommand:
    def test_flow_group_law(self):
        report = run_command(load_spec({"cmd": "flow"}))
        assert report["exit_code"] == 0
        assert report["report"]["group_residual"] < 1e-6

    def test_flow_violation_surfaces_as_exit_2(self):
        report = run_command(load_spec({"cmd": "flow", "tol": 1e-18}))
        assert report["exit_code"] == 2
        assert report["violations"]

    def test_staircase(self):
        report = run_command(load_spec({"cmd": "staircase",
                                        "params": {"depth": 6, "n": 2}}))
        assert report["exit_code"] == 0
        assert report["report"]["var_lower_bound"] == "1/4"

    def test_hyperbolic_small(self):
        report = run_command(load_spec({"cmd": "hyperbolic",
                                        "params": {"N": 64}}))
        assert report["exit_code"] == 0

    def test_sergeraert(self):
        report = run_command(load_spec({"cmd": "sergeraert",
                                        "params": {"k": 3}}))
        assert report["exit_code"] == 0
        assert report["report"]["half_map_residual"] <= 1e-12

    def test_determinism(self):
        doc = {"cmd": "metrics", "params": {"r": "1+bv", "starred": True}}
        a = json.dumps(run_command(load_spec(doc)), sort_keys=True)
        b = json.dumps(run_command(load_spec(doc)), sort_keys=True)
        assert a == b


class TestEmission:
    def test_files_written(self, tmp_path):
        report = run_command(load_spec({"cmd": "flow"}))
        written = emit_report(report, str(tmp_path), ("json", "csv", "svg"))
        names = sorted(os.path.basename(p) for p in written)
        assert "flow.json" in names
        assert "flow.meta.json" in names
        assert any(n.endswith(".csv") for n in names)
        assert any(n.endswith(".svg") for n in names)
        payload = json.loads((tmp_path / "flow.json").read_text())
        assert payload["command"] == "flow"

    def test_json_byte_stable(self, tmp_path):
        doc = {"cmd": "metrics"}
        d1, d2 = tmp_path / "a", tmp_path / "b"
        emit_report(run_command(load_spec(doc)), str(d1))
        emit_report(run_command(load_spec(doc)), str(d2))
        assert (d1 / "metrics.json").read_bytes() == \
            (d2 / "metrics.json").read_bytes()


class TestMain:
    def test_all_commands_registered(self):
        assert len(COMMANDS) == 17

    def test_plain_run(self, capsys):
        rc = main(["metrics"])
        out = capsys.readouterr().out
        assert rc == 0
        assert json.loads(out)["command"] == "metrics"

    def test_spec_file_and_out(self, tmp_path, capsys):
        spec_path = tmp_path / "run.json"
        spec_path.write_text(json.dumps(
            {"cmd": "staircase", "params": {"depth": 5, "n": 2}}))
        out_dir = tmp_path / "out"
        rc = main(["staircase", "--spec", str(spec_path),
                   "--out", str(out_dir), "--format", "json,csv"])
        assert rc == 0
        assert (out_dir / "staircase.json").exists()

    def test_cmd_mismatch_is_error(self, tmp_path, capsys):
        spec_path = tmp_path / "run.json"
        spec_path.write_text(json.dumps({"cmd": "metrics"}))
        rc = main(["flow", "--spec", str(spec_path)])
        assert rc == 1
        assert "does not match" in capsys.readouterr().err

    def test_config_search_path(self, tmp_path, capsys, monkeypatch):
        (tmp_path / "cfg.json").write_text(json.dumps({"cmd": "metrics"}))
        monkeypatch.setenv("DIFFLAB_CONFIG_PATH", str(tmp_path))
        rc = main(["metrics", "--spec", "cfg.json"])
        assert rc == 0

    def test_violation_exit_code(self, capsys):
        rc = main(["flow", "--tol", "1e-18"])
        assert rc == 2
