import json

import pytest

from bespoke_approx import cli
from bespoke_approx import netlist as nl
from bespoke_approx.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, EXIT_VERIFY, main
from bespoke_approx.dse import load_report


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_synth_fixture(tmp_path, capsys):
    code, out, _ = run(capsys, "synth", "--fixture", "svm_r", "--out", str(tmp_path), "--hdl")
    assert code == EXIT_OK
    assert json.loads(out)["mismatches"] == 0
    for f in ("netlist.json", "netlist.v", "area.json", "quantized.json", "manifest.json"):
        assert (tmp_path / f).exists()
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["library_hash"] and man["seeds"]["split"] == 7


def test_synth_from_quantized_and_bad_model(tmp_path, capsys):
    run(capsys, "synth", "--fixture", "svm_r", "--out", str(tmp_path))
    code, out, _ = run(capsys, "eval", "--fixture", "svm_r", "--model", str(tmp_path / "quantized.json"),
                       "--netlist", str(tmp_path / "netlist.json"))
    res = json.loads(out)
    assert code == EXIT_OK and res["test_accuracy"] == res["test_golden_accuracy"]
    bad = tmp_path / "bad.json"
    bad.write_text('{"kind": "SVM-R", "n_features": 11}')
    code, _, err = run(capsys, "synth", "--fixture", "svm_r", "--model", str(bad), "--out", str(tmp_path))
    assert code == EXIT_DATA and "classifiers" in err


def test_missing_library_is_data_error(tmp_path, capsys):
    code, _, err = run(capsys, "synth", "--fixture", "svm_r", "--library", str(tmp_path / "nope.json"))
    assert code == EXIT_DATA and "nope.json" in err


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code == EXIT_USAGE
    assert run(capsys, "synth")[0] == EXIT_USAGE
    assert run(capsys, "explore", "--fixture", "svm_r", "--tau-grid", "0.2,0.9")[0] == EXIT_USAGE
    assert run(capsys, "prune", "--fixture", "svm_r")[0] == EXIT_USAGE


def test_verification_failure_exit_code(tmp_path, capsys, monkeypatch):
    q = tmp_path / "q"
    run(capsys, "synth", "--fixture", "svm_r", "--out", str(q))
    # perturb the quantized model but keep serving the circuit of the original one
    qd = json.loads((q / "quantized.json").read_text())
    qd["layers"][0]["intercepts"][0] += 1000
    (q / "quantized.json").write_text(json.dumps(qd))
    monkeypatch.setattr(cli, "gen_model_circuit", lambda *a, **k: nl.load(q / "netlist.json"))
    code, _, err = run(capsys, "synth", "--fixture", "svm_r", "--model", str(q / "quantized.json"),
                       "--out", str(tmp_path / "o"))
    assert code == EXIT_VERIFY and "disagree" in err


def test_area_table(capsys):
    code, out, _ = run(capsys, "area-table", "-u", "4")
    rows = out.strip().splitlines()[1:]
    assert code == EXIT_OK and len(rows) == 256
    table = {int(r.split()[0]): float(r.split()[1]) for r in rows}
    assert all(table[w] == 0 for w in (0, 1, 2, 4, 8, 16, 32, 64))


def test_coeff_approx_and_prune(tmp_path, capsys):
    code, out, _ = run(capsys, "coeff-approx", "--fixture", "mlp_r", "--out", str(tmp_path))
    res = json.loads(out)
    assert code == EXIT_OK and res["e"] == 4 and res["proxy_area_after"] < res["proxy_area_before"]
    code, out, _ = run(capsys, "prune", "--fixture", "svm_r", "--tau-c", "0.9", "--phi-c", "16",
                       "--out", str(tmp_path))
    res = json.loads(out)
    assert code == EXIT_OK and res["area"] < res["area_before"]
    assert (tmp_path / "pruned.json").exists() and (tmp_path / "candidates.json").exists()


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"fixture": "svm_r", "e": 2, "tau_grid": [0.95, 0.99], "workers": 1,
                               "out": str(tmp_path / "a")}))
    code, out, _ = run(capsys, "explore", "--config", str(cfg))
    assert code == EXIT_OK and "best under budget" in out
    pts, front, man = load_report(tmp_path / "a" / "report.json")
    assert man["config"]["e"] == 2
    assert {p.stage for p in pts} == {"exact", "coeff_only", "cross", "prune_only"}
    assert all(p.netlist_path for p in front)
    assert all((tmp_path / "a" / p.netlist_path).exists() for p in front)
    code, _, _ = run(capsys, "explore", "--config", str(cfg), "-e", "3", "--out", str(tmp_path / "b"))
    assert load_report(tmp_path / "b" / "report.json")[2]["config"]["e"] == 3
    (tmp_path / "broken.json").write_text("{")
    assert run(capsys, "explore", "--config", str(tmp_path / "broken.json"))[0] == EXIT_USAGE


def test_explore_defaults_e_and_pareto_budget_zero(tmp_path, capsys):
    code, _, _ = run(capsys, "explore", "--fixture", "svm_r", "--tau-grid", "95:99", "--workers", "1",
                     "--out", str(tmp_path))
    assert code == EXIT_OK
    pts, front, man = load_report(tmp_path / "report.json")
    assert man["config"]["e"] == 4
    code, out, _ = run(capsys, "pareto", "--report", str(tmp_path / "report.json"), "--budget", "0")
    assert code == EXIT_OK
    top = front[0]
    assert f"accuracy={top.accuracy:.4f}" in out.splitlines()[-1]
