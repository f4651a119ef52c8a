"""Command-line front end: ``cocosum <command> --out DIR ...``.

Every command writes only inside ``--out`` and leaves a ``manifest.json``
there recording the resolved configuration, inputs and outputs. Failures print
a single ``error: <Kind>: <message>`` line to stderr and exit with status 1.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import __version__
from .fixtures import GRADCHECK_EPS, tiny_gradcheck_case
from .metrics import evaluate_corpus
from .model import Config, Vocabs
from .pipeline import build_vocabs, preprocess_records
from .plotting import plot_loss_curve, plot_scores
from .preprocess import Vocab, load_instances, read_jsonl, write_jsonl
from .tensor import grad_check
from .train import TrainConfig, load_checkpoint, greedy_decode, train, save_checkpoint, write_loss_log
from .uml import RELATIONS, UmlGraph, extract_project, java_files

log = logging.getLogger("cocosum")

GRAPH_SUFFIX = ".uml.json"
VOCAB_FILES = {"code": "vocab.code.txt", "sbt": "vocab.sbt.txt", "summary": "vocab.summary.txt"}
GRADCHECK_TOL = 1e-4


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


def load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"config file not found: {p}")
    text = p.read_text(encoding="utf-8")
    if p.suffix in (".yaml", ".yml"):
        import yaml

        data = yaml.safe_load(text) or {}
    else:
        data = json.loads(text)
    if not isinstance(data, dict):
        raise UsageError(f"{p}: config must be a mapping with 'model' and/or 'train' sections")
    unknown = set(data) - {"model", "train"}
    # a manifest is also a valid config file; ignore its bookkeeping keys
    if unknown and "command" not in data:
        raise UsageError(f"{p}: unknown config sections {sorted(unknown)}")
    return data


def resolve_configs(args: argparse.Namespace) -> tuple[Config, TrainConfig]:
    """CLI flag > config file > default."""
    data = load_config_file(args.config)
    model = dict(data.get("model") or {})
    trn = dict(data.get("train") or {})
    flags = {
        ("model", "precision"): args.precision,
        ("model", "radius"): args.radius,
        ("model", "max_summary_len"): args.max_len,
        ("train", "seed"): args.seed,
        ("train", "epochs"): getattr(args, "epochs", None),
        ("train", "batch_size"): getattr(args, "batch_size", None),
        ("train", "lr"): getattr(args, "lr", None),
    }
    for (section, key), value in flags.items():
        if value is not None:
            (model if section == "model" else trn)[key] = value
    return Config.from_dict(model), TrainConfig.from_dict(trn)


def _out_dir(args) -> Path:
    out = Path(args.out)
    if out.exists() and not out.is_dir():
        raise UsageError(f"--out {out} exists and is not a directory")
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_manifest(out: Path, args, inputs: dict, outputs: list[str],
                   cfg: Config | None = None, tcfg: TrainConfig | None = None, extra: dict | None = None) -> None:
    manifest = {
        "command": args.command,
        "version": __version__,
        "config_file": args.config,
        "seed": tcfg.seed if tcfg is not None else args.seed,
        "model": cfg.to_dict() if cfg is not None else None,
        "train": tcfg.to_dict() if tcfg is not None else None,
        "inputs": inputs,
        "outputs": sorted(outputs),
    }
    if extra:
        manifest.update(extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def load_graphs(paths: list[str]) -> dict[str, UmlGraph]:
    """Graph files keyed by id (file name without the ``.uml.json`` suffix)."""
    files: list[Path] = []
    for p in map(Path, paths):
        if p.is_dir():
            files.extend(sorted(p.glob(f"*{GRAPH_SUFFIX}")))
        elif p.exists():
            files.append(p)
        else:
            raise FileNotFoundError(f"graph path not found: {p}")
    graphs = {}
    for f in files:
        gid = f.name[: -len(GRAPH_SUFFIX)] if f.name.endswith(GRAPH_SUFFIX) else f.stem
        graphs[gid] = UmlGraph.load(f)
    return graphs


def load_vocabs(directory: str | Path) -> Vocabs:
    d = Path(directory)
    for name in VOCAB_FILES.values():
        if not (d / name).exists():
            raise FileNotFoundError(f"vocabulary file not found: {d / name}")
    return Vocabs(**{k: Vocab.load(d / v) for k, v in VOCAB_FILES.items()})


# ---------------------------------------------------------------------------
# commands


def cmd_extract_uml(args) -> int:
    out = _out_dir(args)
    outputs = []
    for project in args.projects:
        project = Path(project)
        if not project.is_dir():
            raise FileNotFoundError(f"project directory not found: {project}")
        gid = args.graph_id if args.graph_id and len(args.projects) == 1 else project.resolve().name
        graph = extract_project(project)
        if len(graph) == 0:
            log.warning("no Java classes found under %s; writing an empty graph", project)
        name = gid + GRAPH_SUFFIX
        graph.save(out / name)
        outputs.append(name)
        counts = graph.relation_counts()
        rel = " ".join(f"{r.value}={counts[r.value]}" for r in RELATIONS)
        print(f"{gid}\tnodes={len(graph)}\tedges={len(graph.edges)}\t{rel}\tfiles={len(java_files(project))}")
    write_manifest(out, args, {"projects": args.projects}, outputs)
    return 0


def cmd_preprocess(args) -> int:
    out = _out_dir(args)
    graphs = load_graphs(args.graphs)
    instances, stats = preprocess_records(read_jsonl(args.data), graphs)
    write_jsonl(out / "instances.jsonl", (x.to_json() for x in instances))
    (out / "stats.json").write_text(json.dumps(stats, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    for key, value in stats.items():
        print(f"{key}\t{value}")
    write_manifest(out, args, {"data": args.data, "graphs": args.graphs}, ["instances.jsonl", "stats.json"])
    return 0


def cmd_build_vocab(args) -> int:
    out = _out_dir(args)
    instances = load_instances(args.instances)
    vocabs = build_vocabs(instances, load_graphs(args.graphs), args.cap)
    for kind, name in VOCAB_FILES.items():
        v = getattr(vocabs, kind)
        v.save(out / name)
        print(f"{kind}\t{len(v)}")
    write_manifest(out, args, {"instances": args.instances, "graphs": args.graphs},
                   list(VOCAB_FILES.values()), extra={"cap": args.cap})
    return 0


def cmd_train(args) -> int:
    cfg, tcfg = resolve_configs(args)
    out = _out_dir(args)
    graphs = load_graphs(args.graphs)
    instances = load_instances(args.instances)
    valid = load_instances(args.valid) if args.valid else None
    vocabs = load_vocabs(args.vocab) if args.vocab else build_vocabs(instances, graphs, args.cap)
    cfg = dataclasses.replace(
        cfg, code_vocab=len(vocabs.code), sbt_vocab=len(vocabs.sbt), summary_vocab=len(vocabs.summary)
    )
    start = time.perf_counter()
    ckpt, history = train(
        instances, graphs, vocabs, cfg, tcfg, valid,
        on_epoch=lambda r: print(r.line(), flush=True),
    )
    log.info("trained %d epochs in %.1f s", len(history), time.perf_counter() - start)
    save_checkpoint(ckpt, out / "model.ckpt")
    write_loss_log(history, out / "loss.csv")
    outputs = ["model.ckpt", "loss.csv"]
    if history:
        plot_loss_curve(history, out / "loss.png")
        outputs.append("loss.png")
    write_manifest(out, args, {"instances": args.instances, "graphs": args.graphs,
                               "valid": args.valid, "vocab": args.vocab}, outputs, cfg, tcfg,
                   extra={"best_epoch": ckpt.epoch})
    return 0


def cmd_summarize(args) -> int:
    out = _out_dir(args)
    ckpt = load_checkpoint(args.checkpoint)
    overrides = {}
    if args.radius is not None:
        overrides["radius"] = args.radius
    if args.precision is not None:
        overrides["precision"] = args.precision
    if overrides:
        ckpt.config = dataclasses.replace(ckpt.config, **overrides)
    max_len = args.max_len if args.max_len is not None else ckpt.config.max_summary_len
    instances = load_instances(args.instances)
    graphs = load_graphs(args.graphs)
    preds = greedy_decode(instances, graphs, ckpt, max_len=max_len)
    write_jsonl(out / "predictions.jsonl", ({"id": x.id, "tokens": p} for x, p in zip(instances, preds)))
    write_jsonl(out / "references.jsonl", ({"id": x.id, "tokens": x.summary_tokens} for x in instances))
    for x, p in zip(instances, preds):
        print(f"{x.id}\t{' '.join(p)}")
    write_manifest(out, args, {"checkpoint": args.checkpoint, "instances": args.instances,
                               "graphs": args.graphs}, ["predictions.jsonl", "references.jsonl"],
                   ckpt.config, extra={"max_len": max_len})
    return 0


def cmd_evaluate(args) -> int:
    out = _out_dir(args)
    report = evaluate_corpus(args.predictions, args.references)
    text = report.text()
    (out / "scores.tsv").write_text(text, encoding="utf-8")
    (out / "scores.json").write_text(
        json.dumps({**report.as_dict(), "count": report.count}, indent=1, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    plot_scores(report.per_sample, out / "scores.png")
    sys.stdout.write(text)
    write_manifest(out, args, {"predictions": args.predictions, "references": args.references},
                   ["scores.tsv", "scores.json", "scores.png"])
    return 0


def cmd_gradcheck(args) -> int:
    out = _out_dir(args)
    precision = args.precision or "double"
    seed = args.seed if args.seed is not None else 0
    model, batch = tiny_gradcheck_case(precision=precision, seed=seed)
    start = time.perf_counter()
    err = grad_check(lambda: model.loss(batch), model.parameters(), eps=args.eps)
    elapsed = time.perf_counter() - start
    ok = bool(err <= GRADCHECK_TOL)
    n = sum(p.data.size for p in model.parameters())
    print(f"max relative error\t{err:.3e}\ttolerance\t{GRADCHECK_TOL:g}\t"
          f"parameters\t{n}\tseconds\t{elapsed:.1f}\t{'PASS' if ok else 'FAIL'}")
    (out / "gradcheck.json").write_text(
        json.dumps({"max_rel_err": float(err), "tolerance": GRADCHECK_TOL, "eps": args.eps,
                    "precision": precision, "parameters": n, "passed": bool(ok)}, indent=1, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    write_manifest(out, args, {}, ["gradcheck.json"], model.cfg, extra={"seed": seed})
    return 0 if ok else 1


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON or YAML file with 'model' and 'train' sections")
    common.add_argument("--seed", type=int, help="random seed (overrides the config file)")
    common.add_argument("--out", required=True, help="output directory; nothing is written elsewhere")
    common.add_argument("--max-len", type=int, dest="max_len", help="maximum summary length")
    common.add_argument("--radius", type=int, help="UML subgraph radius around the enclosing class")
    common.add_argument("--precision", choices=("single", "double"))

    parser = argparse.ArgumentParser(prog="cocosum", description="Contextual code summarization toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract-uml", parents=[common], help="UML class graph from Java sources")
    p.add_argument("projects", nargs="+", help="project source directories")
    p.add_argument("--graph-id", help="graph id (single project only; default: directory name)")
    p.set_defaults(func=cmd_extract_uml)

    p = sub.add_parser("preprocess", parents=[common], help="filter and tokenize a raw dataset")
    p.add_argument("--data", required=True, help="raw JSONL records")
    p.add_argument("--graphs", nargs="+", required=True, help="graph files or directories")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("build-vocab", parents=[common], help="code, SBT and summary vocabularies")
    p.add_argument("--instances", required=True)
    p.add_argument("--graphs", nargs="+", required=True)
    p.add_argument("--cap", type=int, default=10_000, help="vocabulary size including special tokens")
    p.set_defaults(func=cmd_build_vocab)

    p = sub.add_parser("train", parents=[common], help="train a model")
    p.add_argument("--instances", required=True)
    p.add_argument("--graphs", nargs="+", required=True)
    p.add_argument("--valid", help="validation instances")
    p.add_argument("--vocab", help="directory from build-vocab (default: build from the training set)")
    p.add_argument("--cap", type=int, default=10_000)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--lr", type=float)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("summarize", parents=[common], help="greedy-decode summaries")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--instances", required=True)
    p.add_argument("--graphs", nargs="+", required=True)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("evaluate", parents=[common], help="BLEU-4, METEOR, ROUGE-L and CIDEr")
    p.add_argument("--predictions", required=True)
    p.add_argument("--references", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference check of the full model")
    p.add_argument("--eps", type=float, default=GRADCHECK_EPS)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def _setup_logging() -> None:
    level = os.environ.get("COCOSUM_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except KeyboardInterrupt:
        print("error: Interrupted: cancelled by user", file=sys.stderr)
        return 130
    except Exception as exc:  # one machine-parsable line, no traceback
        msg = str(exc).replace("\n", " ")
        if isinstance(exc, KeyError) and msg.startswith(("'", '"')):
            msg = msg[1:-1]
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        log.debug("traceback", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
