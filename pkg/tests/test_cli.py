from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import pydot
import pytest

from btmc.cli import EXIT_LIMIT, EXIT_OK, EXIT_USAGE, EXIT_VIOLATED, main
from btmc.dsl import parse_items, parse_scenario, parse_tree
from btmc.semantics import all_traces

MODELS = resources.files("btmc").joinpath("models")
GOLDEN = Path(__file__).parent / "golden"


def model(name: str) -> str:
    return str(MODELS.joinpath(name))


def call(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestParse:
    @pytest.mark.parametrize("name", ["grid_isr.bt", "grid_isr_faulty.bt", "distance.mon", "budget.mon",
                                      "collision.mon", "grid_isr.ltl", "overshoot.scn", "teleport.scn"])
    def test_bundled_files_parse(self, capsys, name):
        code, out, _ = call(capsys, "parse", model(name))
        assert code == EXIT_OK and out.strip().endswith(")") and ": ok (" in out

    def test_malformed_reports_location(self, capsys, tmp_path):
        bad = tmp_path / "bad.bt"
        bad.write_text("tree t {\n  blackboard { x : 0..3 = 0 }\n}\n")
        code, _, err = call(capsys, "parse", str(bad))
        assert code == EXIT_USAGE
        assert err.startswith(f"{bad}:2:")

    def test_validation_error(self, capsys, tmp_path):
        text = Path(model("grid_isr.bt")).read_text().replace("root =", "root = ghost; unused =", 1)
        bad = tmp_path / "invalid.bt"
        bad.write_text(text)
        code, _, err = call(capsys, "parse", str(bad))
        assert code == EXIT_USAGE and err

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = call(capsys, "parse", str(tmp_path / "nope.bt"))
        assert code == EXIT_USAGE and "nope.bt" in err

    def test_dot_output_is_valid(self, capsys, tmp_path):
        out = tmp_path / "grid.dot"
        code, _, _ = call(capsys, "parse", model("grid_isr.bt"), "--dot", str(out))
        assert code == EXIT_OK
        (graph,) = pydot.graph_from_dot_data(out.read_text())
        assert graph.get_type() == "digraph"

    def test_json_format(self, capsys):
        code, out, _ = call(capsys, "parse", model("grid_isr.bt"), "--format", "json")
        payload = json.loads(out)
        assert code == EXIT_OK and payload["ok"] and payload["kind"] == "tree" and payload["nodes"] == 9

    def test_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["verify", model("grid_isr.bt")])
        assert exc.value.code == EXIT_USAGE


class TestSimulate:
    def test_golden_five_steps(self, capsys):
        code, out, _ = call(capsys, "simulate", model("grid_isr.bt"), "--steps", "5")
        assert code == EXIT_OK
        assert out == (GOLDEN / "grid_5.jsonl").read_text()
        rows = [json.loads(line) for line in out.splitlines()]
        assert [r["time"] for r in rows] == [1, 2, 3, 4, 5]

    def test_deterministic(self, capsys):
        runs = [call(capsys, "simulate", model("grid_isr.bt"), "--steps", "8")[1] for _ in range(2)]
        assert runs[0] == runs[1]

    def test_fault_latency(self, capsys):
        code, out, _ = call(capsys, "simulate", model("grid_isr_faulty.bt"), "--monitor", model("distance.mon"),
                            "--scenario", model("overshoot.scn"), "--steps", "12")
        assert code == EXIT_OK
        assert out.splitlines()[-1] == "# report: fault at step 4, detected at step 4, latency 0"

    def test_fault_latency_json(self, capsys):
        code, out, _ = call(capsys, "simulate", model("grid_isr_faulty.bt"), "--monitor", model("distance.mon"),
                            "--scenario", model("overshoot.scn"), "--steps", "12", "--format", "json")
        report = json.loads(out.splitlines()[-1])["report"]
        assert report["latency"] == 0 and report["injected_at"] == 4

    def test_enumerate_count(self, capsys):
        code, out, _ = call(capsys, "simulate", model("grid_isr.bt"), "--resolver", "enumerate", "--steps", "3")
        want = len(all_traces(parse_tree(Path(model("grid_isr.bt")).read_text()), 3))
        assert code == EXIT_OK and out.splitlines()[-1] == f"# traces: {want}"
        assert out.count("# trace ") == want

    def test_enumerate_rejects_monitor(self, capsys):
        code, _, _ = call(capsys, "simulate", model("grid_isr.bt"), "--resolver", "enumerate",
                          "--monitor", model("budget.mon"))
        assert code == EXIT_USAGE


class TestVerify:
    def test_true_holds(self, capsys):
        code, out, _ = call(capsys, "verify", model("grid_isr.bt"), "--spec", "G true")
        assert code == EXIT_OK and "HOLDS" in out

    def test_faulty_model_violated_with_replay(self, capsys):
        code, out, _ = call(capsys, "verify", model("grid_isr_faulty.bt"), "--spec", model("grid_isr.ltl"),
                            "--format", "json")
        assert code == EXIT_VIOLATED
        results = json.loads(out)["results"]
        bad = [r for r in results if r["verdict"] != "holds"]
        assert [r["spec"] for r in bad] == ["tracking"]
        assert all(r["replay_ok"] for r in bad)
        assert bad[0]["cycle"]

    def test_nominal_model_holds(self, capsys):
        code, out, _ = call(capsys, "verify", model("grid_isr.bt"), "--spec", model("grid_isr.ltl"))
        assert code == EXIT_OK, out

    def test_going_home_abandons_tracking(self, capsys):
        code, out, _ = call(capsys, "verify", model("grid_isr.bt"), "--monitor", model("budget.mon"),
                            "--spec", model("grid_isr.ltl"), "--format", "json")
        verdicts = {r["spec"]: r["verdict"] for r in json.loads(out)["results"]}
        assert code == EXIT_VIOLATED
        assert verdicts.pop("tracking") == "violated"
        assert set(verdicts.values()) == {"holds"}

    def test_levels_agree(self, capsys):
        code, out, _ = call(capsys, "verify", model("grid_isr_faulty.bt"), "--spec", "ltl tracking { "
                            "G (abs(tar_x - dest_x) + abs(tar_y - dest_y) <= 1) }", "--compare-levels")
        assert code == EXIT_VIOLATED
        assert "  levels agree: yes" in out.splitlines()
        assert out.count("VIOLATED") == 4

    @pytest.mark.parametrize("level", ["no", "first", "last", "full", "full_opt"])
    def test_opt_level_values(self, capsys, level):
        code, _, _ = call(capsys, "verify", model("grid_isr.bt"), "--spec", "G true", "--opt-level", level)
        assert code == EXIT_OK

    def test_smv_engine(self, capsys):
        code, out, _ = call(capsys, "verify", model("grid_isr_faulty.bt"), "--spec",
                            "G (abs(tar_x - dest_x) + abs(tar_y - dest_y) <= 1)", "--engine", "smv-export")
        assert code == EXIT_VIOLATED and "replay on interpreter: ok" in out

    def test_invariant_path(self, capsys):
        code, out, _ = call(capsys, "verify", model("grid_isr.bt"), "--spec", "invar { time < 3 }")
        assert code == EXIT_VIOLATED and "path to violation (4 states)" in out

    def test_state_limit(self, capsys, monkeypatch):
        monkeypatch.setenv("BTMC_STATE_LIMIT", "10")
        code, _, err = call(capsys, "verify", model("grid_isr.bt"), "--spec", "G true")
        assert code == EXIT_LIMIT and "BTMC_STATE_LIMIT" in err

    def test_bad_formula(self, capsys):
        code, _, _ = call(capsys, "verify", model("grid_isr.bt"), "--spec", "G (")
        assert code == EXIT_USAGE


class TestExport:
    def test_stdout_and_file_agree(self, capsys, tmp_path):
        out = tmp_path / "grid.smv"
        args = ["export-smv", model("grid_isr.bt"), "--monitor", model("distance.mon"), "--spec",
                model("grid_isr.ltl"), "--opt-level", "last"]
        _, text, _ = call(capsys, *args)
        code, msg, _ = call(capsys, *args, "-o", str(out))
        assert code == EXIT_OK and msg.startswith(f"wrote {out}")
        assert out.read_bytes() == text.encode()
        assert text.count("LTLSPEC") == 4 and text.count("INVARSPEC") == 1

    def test_deterministic(self, capsys):
        a = call(capsys, "export-smv", model("grid_isr.bt"), "--spec", "G true")[1]
        b = call(capsys, "export-smv", model("grid_isr.bt"), "--spec", "G true")[1]
        assert a == b and a.startswith("-- model")


class TestGen:
    SPEC = """
nfa ends_a { alphabet a, b; states p, q; init p; accept q;
  trans p a -> p; trans p b -> p; trans p a -> q; word b a; word a b; }
ntm inc { alphabet _, 1; blank _; states scan, done; init scan; accept done;
  trans scan 1 -> scan 1 R; trans scan _ -> done 1 R; input 1 1; bound 6; }
"""

    @pytest.mark.parametrize("kind, count", [("nfa", 3), ("tm", 1)])
    def test_outputs_parse_and_are_deterministic(self, capsys, tmp_path, kind, count):
        spec = tmp_path / "defs.items"
        spec.write_text(self.SPEC)
        outs = []
        for d in ("a", "b"):
            code, _, _ = call(capsys, "gen", kind, str(spec), "-o", str(tmp_path / d))
            assert code == EXIT_OK
            outs.append({p.name: p.read_bytes() for p in (tmp_path / d).iterdir()})
        assert outs[0] == outs[1] and len(outs[0]) == count
        for name, data in outs[0].items():
            if name.endswith(".bt"):
                parse_tree(data.decode())
            else:
                parse_scenario(data.decode())
            code, _, _ = call(capsys, "parse", str(tmp_path / "a" / name))
            assert code == EXIT_OK

    def test_generated_nfa_runs_with_word(self, capsys, tmp_path):
        spec = tmp_path / "defs.items"
        spec.write_text(self.SPEC)
        call(capsys, "gen", "nfa", str(spec), "-o", str(tmp_path))
        code, out, _ = call(capsys, "simulate", str(tmp_path / "ends_a.bt"), "--scenario",
                            str(tmp_path / "ends_a.word_0.scn"), "--steps", "2")
        assert code == EXIT_OK
        assert [json.loads(r)["status:run"] for r in out.splitlines()] == ["F", "S"]

    def test_nothing_to_generate(self, capsys, tmp_path):
        spec = tmp_path / "defs.items"
        spec.write_text(self.SPEC.split("ntm")[0])
        assert parse_items(spec.read_text())
        code, _, err = call(capsys, "gen", "tm", str(spec), "-o", str(tmp_path / "o"))
        assert code == EXIT_USAGE and "no tm definitions" in err
