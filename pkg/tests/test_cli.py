import json
import os
from pathlib import Path

import pytest

from cocosum.cli import main
from cocosum.fixtures import VEHICLE_SOURCES, write_sources, write_toy_corpus

SMALL = {"model": {"embed_dim": 8, "hidden_dim": 8, "class_dim": 8, "gnn_dim": 8, "dropout": 0.0,
                   "precision": "double"},
         "train": {"batch_size": 20, "epochs": 2, "lr": 0.005}}


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def snapshot(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture
def corpus(tmp_path):
    inputs = tmp_path / "inputs"
    project, raw = write_toy_corpus(inputs)
    (inputs / "small.json").write_text(json.dumps(SMALL))
    return inputs, project, raw


def test_extract_uml_vehicle_summary_and_rerun(tmp_path, capsys):
    src = write_sources(VEHICLE_SOURCES, tmp_path / "vehicles")
    code, out, _ = run(capsys, "extract-uml", src, "--out", tmp_path / "a")
    assert code == 0
    assert "nodes=7\tedges=6" in out
    assert "REALIZATION=1 GENERALIZATION=1 DEPENDENCY=1 ASSOCIATION=3" in out
    run(capsys, "extract-uml", src, "--out", tmp_path / "b")
    assert (tmp_path / "a/vehicles.uml.json").read_bytes() == (tmp_path / "b/vehicles.uml.json").read_bytes()
    assert json.loads((tmp_path / "a/manifest.json").read_text())["command"] == "extract-uml"


def test_extract_uml_empty_dir(tmp_path, capsys, caplog):
    (tmp_path / "empty").mkdir()
    code, out, _ = run(capsys, "extract-uml", tmp_path / "empty", "--out", tmp_path / "o")
    assert code == 0 and "nodes=0" in out
    assert any("no Java classes" in r.message for r in caplog.records)


def test_preprocess_counts(tmp_path, capsys, corpus):
    inputs, project, raw = corpus
    run(capsys, "extract-uml", project, "--out", tmp_path / "g")
    extra = [
        {"id": "short", "class_name": "Account", "code": "int f() { return 1; }", "summary": "Too short.",
         "uml_graph_id": "toybank"},
        {"id": "lost", "class_name": "Account", "code": "int f() { return 1; }",
         "summary": "Returns one always here.", "uml_graph_id": "elsewhere"},
    ]
    with open(raw, "a") as fh:
        for rec in extra:
            fh.write(json.dumps(rec) + "\n")
    code, out, _ = run(capsys, "preprocess", "--data", raw, "--graphs", tmp_path / "g", "--out", tmp_path / "p")
    assert code == 0
    stats = json.loads((tmp_path / "p/stats.json").read_text())
    assert stats["kept"] == 20
    assert stats["dropped: short summary"] == 1
    assert stats["dropped: missing graph"] == 1
    assert "dropped: short summary\t1" in out


def test_pipeline_end_to_end_stays_in_out(tmp_path, capsys, corpus, monkeypatch):
    inputs, project, raw = corpus
    work = tmp_path / "work"
    work.mkdir()
    monkeypatch.chdir(work)
    before = snapshot(inputs)
    assert run(capsys, "extract-uml", project, "--out", "g")[0] == 0
    assert run(capsys, "preprocess", "--data", raw, "--graphs", "g", "--out", "p")[0] == 0
    code, out, _ = run(capsys, "build-vocab", "--instances", "p/instances.jsonl", "--graphs", "g", "--out", "v")
    assert code == 0 and out.startswith("code\t")
    code, out, _ = run(capsys, "train", "--config", inputs / "small.json", "--instances", "p/instances.jsonl",
                       "--graphs", "g", "--vocab", "v", "--out", "t")
    assert code == 0 and len(out.splitlines()) == 2
    assert {"model.ckpt", "loss.csv", "loss.png", "manifest.json"} <= set(os.listdir("t"))
    code, out, _ = run(capsys, "summarize", "--checkpoint", "t/model.ckpt", "--instances", "p/instances.jsonl",
                       "--graphs", "g", "--max-len", "5", "--out", "s")
    assert code == 0 and len(out.splitlines()) == 20
    preds = [json.loads(l) for l in Path("s/predictions.jsonl").read_text().splitlines()]
    assert all(len(p["tokens"]) <= 5 for p in preds)
    code, out, _ = run(capsys, "evaluate", "--predictions", "s/predictions.jsonl",
                       "--references", "s/references.jsonl", "--out", "e")
    assert code == 0 and out.splitlines()[0] == "BLEU-4\tMETEOR\tROUGE-L\tCIDER"
    assert (work / "e/scores.png").stat().st_size > 0
    assert snapshot(inputs) == before
    assert sorted(os.listdir(work)) == ["e", "g", "p", "s", "t", "v"]


def test_manifest_reproduces_training(tmp_path, capsys, corpus):
    inputs, project, raw = corpus
    run(capsys, "extract-uml", project, "--out", tmp_path / "g")
    run(capsys, "preprocess", "--data", raw, "--graphs", tmp_path / "g", "--out", tmp_path / "p")
    args = ["train", "--instances", tmp_path / "p/instances.jsonl", "--graphs", tmp_path / "g"]
    assert run(capsys, *args, "--config", inputs / "small.json", "--seed", "3", "--out", tmp_path / "t1")[0] == 0
    manifest = json.loads((tmp_path / "t1/manifest.json").read_text())
    assert manifest["train"]["seed"] == 3 and manifest["model"]["precision"] == "double"
    assert run(capsys, *args, "--config", tmp_path / "t1/manifest.json", "--out", tmp_path / "t2")[0] == 0
    assert (tmp_path / "t1/model.ckpt").read_bytes() == (tmp_path / "t2/model.ckpt").read_bytes()


def test_config_precedence_and_yaml(tmp_path, capsys, corpus):
    inputs, project, raw = corpus
    run(capsys, "extract-uml", project, "--out", tmp_path / "g")
    run(capsys, "preprocess", "--data", raw, "--graphs", tmp_path / "g", "--out", tmp_path / "p")
    (tmp_path / "c.yaml").write_text(
        "model:\n  embed_dim: 4\n  hidden_dim: 4\n  class_dim: 4\n  gnn_dim: 4\n  radius: 1\n"
        "train:\n  epochs: 1\n  seed: 9\n  batch_size: 20\n"
    )
    code, _, _ = run(capsys, "train", "--config", tmp_path / "c.yaml", "--instances", tmp_path / "p/instances.jsonl",
                     "--graphs", tmp_path / "g", "--seed", "4", "--out", tmp_path / "t")
    assert code == 0
    m = json.loads((tmp_path / "t/manifest.json").read_text())
    assert m["train"]["seed"] == 4  # flag beats file
    assert m["model"]["radius"] == 1 and m["model"]["embed_dim"] == 4  # file beats default
    assert m["train"]["lr"] == 0.001 and m["model"]["precision"] == "single"  # defaults


def test_evaluate_identical_prints_100(tmp_path, capsys):
    ref = tmp_path / "r.jsonl"
    ref.write_text("\n".join(json.dumps({"id": i, "tokens": t}) for i, t in
                             enumerate(["gets the current value", "sets a new name now"])) + "\n")
    code, out, _ = run(capsys, "evaluate", "--predictions", ref, "--references", ref, "--out", tmp_path / "e")
    assert code == 0
    assert out.splitlines()[1].split("\t")[0] == "100.00"


def test_missing_checkpoint_error_line(tmp_path, capsys):
    code, out, err = run(capsys, "summarize", "--checkpoint", tmp_path / "nope.ckpt", "--instances", "x",
                         "--graphs", "y", "--out", tmp_path / "s")
    assert code != 0
    lines = err.strip().splitlines()
    assert len(lines) == 1
    assert lines[0].startswith("error: FileNotFoundError: ") and "nope.ckpt" in lines[0]


def test_unknown_config_section(tmp_path, capsys):
    (tmp_path / "c.json").write_text(json.dumps({"optimizer": {}}))
    code, _, err = run(capsys, "train", "--config", tmp_path / "c.json", "--instances", "x", "--graphs", "y",
                       "--out", tmp_path / "t")
    assert code == 1 and err.startswith("error: UsageError:")


def test_gradcheck_command(tmp_path, capsys):
    code, out, _ = run(capsys, "gradcheck", "--out", tmp_path / "gc")
    assert code == 0
    fields = out.strip().split("\t")
    assert fields[0] == "max relative error" and float(fields[1]) <= 1e-4 and fields[-1] == "PASS"
    assert json.loads((tmp_path / "gc/gradcheck.json").read_text())["passed"] is True
