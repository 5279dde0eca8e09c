import json

import pytest

from fairpm.cli import main
from fairpm.eventlog import parse_xes
from fairpm.synthesis import annotations_from_json


def test_generate_writes_log_and_annotations(tmp_path, capsys):
    out = tmp_path / "cs.xes"
    ann = tmp_path / "cs-annotations.json"
    code = main(["generate", "cs", "--n-cases", "40", "--seed", "3",
                 "--out", str(out), "--annotations", str(ann)])
    assert code == 0
    log = parse_xes(out.read_bytes())
    assert len(log.traces) == 40
    decisions, sensitive = annotations_from_json(ann.read_text())
    assert sensitive == ("age", "gender")
    assert len(decisions) == 3


def test_generate_then_enrich_round_trip(tmp_path):
    raw = tmp_path / "bpi.xes"
    enriched = tmp_path / "bpi-enriched.xes"
    assert main(["generate", "bpi-like", "--n-cases", "60", "--seed", "3",
                 "--out", str(raw)]) == 0
    assert main(["enrich", "bpi", "--input", str(raw), "--seed", "4",
                 "--out", str(enriched)]) == 0
    log = parse_xes(enriched.read_bytes())
    assert all(t.case_attributes.get("gender") in ("female", "male")
               for t in log.traces)


def test_evaluate_runs_pipeline_and_emits(tmp_path, capsys):
    config = {"name": "cli-test", "seed": 5, "folds": 2,
              "dataset": {"kind": "cs", "n_cases": 200}}
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(config))
    out_dir = tmp_path / "results"
    code = main(["evaluate", "--config", str(cfg_path), "--jobs", "1",
                 "--out-dir", str(out_dir)])
    assert code == 0
    names = {p.name for p in out_dir.iterdir()}
    assert names == {"cli-test.json", "results_table.csv", "plotdata.csv"}
    captured = capsys.readouterr().out
    assert "M*" in captured and "accuracy=" in captured


def test_toml_config_loading(tmp_path):
    cfg_path = tmp_path / "config.toml"
    cfg_path.write_text(
        'name = "toml-test"\nseed = 5\nfolds = 2\n\n'
        '[dataset]\nkind = "cs"\nn_cases = 120\n')
    from fairpm.cli import load_config
    config = load_config(str(cfg_path))
    assert config.name == "toml-test"
    assert config.dataset == {"kind": "cs", "n_cases": 120}


def test_cli_reports_errors_with_nonzero_exit(tmp_path, capsys):
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps({"name": "bad", "seed": 1, "folds": 2,
                                    "dataset": {"kind": "nope"}}))
    code = main(["evaluate", "--config", str(cfg_path), "--jobs", "1"])
    assert code == 1
    assert "[dataset]" in capsys.readouterr().err


def test_cli_unknown_generator_rejected(tmp_path):
    with pytest.raises(SystemExit):
        main(["generate", "unknown", "--out", str(tmp_path / "x.xes")])
