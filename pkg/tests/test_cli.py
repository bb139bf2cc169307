import copy
import json

import pytest

from gogtree.cli import main
from gogtree.graph_of_groups import example_config


def run(tmp_path, *argv):
    code = main(list(argv) + ["--out", str(tmp_path)])
    return code


def report(tmp_path, command):
    return json.loads((tmp_path / f"{command}.json").read_text())


@pytest.mark.parametrize("name", ["free_amalgam_trivial", "double_f2", "hnn_malnormal",
                                  "finite_edge"])
def test_validate_bundled(tmp_path, name):
    assert run(tmp_path, "validate", "--config", name) == 0
    doc = report(tmp_path, "validate")
    assert doc["result"]["ok"]
    assert doc["config"]["graph"]["name"] == name


def test_presentation_hnn(tmp_path):
    assert run(tmp_path, "presentation", "--config", "hnn_malnormal") == 0
    res = report(tmp_path, "presentation")["result"]
    assert "t a a t^-1 b^-1 b^-1" in res["text"]
    assert len(res["presentation"]["relators"]) == res["expected_relator_count"]


def test_tree_and_space_with_dot(tmp_path):
    assert run(tmp_path, "tree", "--config", "double_f2", "--radius", "2",
               "--budget", "3", "--dot") == 0
    assert report(tmp_path, "tree")["result"]["stats"]["is_tree"]
    assert (tmp_path / "tree.dot").exists()
    assert run(tmp_path, "space", "--config", "double_f2", "--dot") == 0
    doc = report(tmp_path, "space")
    assert doc["ledger"]["D0"]["provenance"] == "computed"
    assert (tmp_path / "space.dot").exists()


def test_ladder_report_replays(tmp_path):
    assert run(tmp_path, "ladder", "--config", "double_f2", "--d0", "1", "--d1", "2",
               "--seed", "4", "--samples", "50", "--radius", "2") == 0
    doc = report(tmp_path, "ladder")
    res = doc["result"]
    A, B = (eval_fraction(res["retraction"][k]) for k in ("A", "B"))
    for d, dp in res["retraction"]["pairs"]:
        assert eval_fraction(dp) <= A * eval_fraction(d) + B
    assert {c["ledger"] for c in res["citations"]} == {"A", "B", "C"}
    assert doc["ledger"]["D1"]["provenance"] == "configured"


def eval_fraction(text):
    from fractions import Fraction
    return Fraction(str(text))


def test_reports_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["ladder", "--config", "double_f2", "--seed", "9", "--samples", "40",
                     "--radius", "2", "--out", str(out)]) == 0
    assert (a / "ladder.json").read_bytes() == (b / "ladder.json").read_bytes()


def test_limitset_csv_and_sweep(tmp_path):
    assert run(tmp_path, "limitset", "--config", "double_f2", "--radii", "4",
               "--dconfig", "5", "--csv") == 0
    assert (tmp_path / "defect.csv").read_text().startswith("R,max_defect")
    assert run(tmp_path, "limitset", "--config", "double_f2", "--radii", "4",
               "--sweep", "dconfig=4,5") == 0
    doc = report(tmp_path, "limitset")
    assert [r["dconfig"] for r in doc["runs"]] == [4, 5]


def test_witness_and_attach(tmp_path):
    assert run(tmp_path, "witness", "--config", "double_f2") == 0
    assert report(tmp_path, "witness")["result"]["all_verified"]
    assert run(tmp_path, "attach", "--config", "double_f2", "--subgroup", "a^2 b^2") == 0
    res = report(tmp_path, "attach")["result"]
    assert res["validation"]["ok"] and res["K"] == ["a^2 b^2"]
    assert (tmp_path / "attached_graph.json").exists()


def test_flare(tmp_path):
    assert run(tmp_path, "flare", "--config", "double_f2") == 0
    res = report(tmp_path, "flare")["result"]
    assert len(res["separations"]) == 5


def test_experiment_config_file(tmp_path):
    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps({"graph": "hnn_malnormal", "params": {"radius": 1}}))
    assert run(tmp_path, "tree", "--config", str(cfg)) == 0
    assert report(tmp_path, "tree")["config"]["params"]["radius"] == 1


def test_invalid_config_gives_error_json(tmp_path, capsys):
    doc = copy.deepcopy(example_config("double_f2"))
    doc["spanning_tree"] = []
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert run(tmp_path, "tree", "--config", str(bad)) == 2
    err = json.loads(capsys.readouterr().out)
    assert err["error"] == "InvalidGraphOfGroups"
    assert not err["validation"]["ok"]
    # validate itself reports the failure instead of raising
    assert run(tmp_path, "validate", "--config", str(bad)) == 1
    assert run(tmp_path, "tree", "--config", "no_such_thing") == 2
    assert run(tmp_path, "tree", "--config", "double_f2", "--radius", "-1") == 2
