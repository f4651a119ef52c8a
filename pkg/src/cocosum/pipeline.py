"""Raw dataset records to filtered, tokenized summarization instances."""

from __future__ import annotations

import logging
import re
from collections import Counter
from typing import Iterable

from .model import Vocabs
from .preprocess import (
    SummarizationInstance,
    build_vocab,
    first_sentence,
    normalize_class_name,
    preprocess_code,
    preprocess_summary,
)
from .lexer import tokenize
from .sbt import AstParseError, flat_ast, from_nested, sbt_flatten
from .uml import UmlGraph

log = logging.getLogger(__name__)

REQUIRED_FIELDS = ("id", "class_name", "code", "summary", "uml_graph_id")
DROP_REASONS = ("malformed", "missing graph", "class not in graph", "short summary", "empty code")


def simple_class_name(raw: str) -> str:
    name = raw
    while True:
        stripped = re.sub(r"<[^<>]*>", "", name)
        if stripped == name:
            break
        name = stripped
    return name.strip().rsplit(".", 1)[-1]


def preprocess_record(rec: dict, graphs: dict[str, UmlGraph]) -> tuple[SummarizationInstance | None, str | None]:
    """One raw record to an instance, or ``(None, reason)`` when it is filtered."""
    if not isinstance(rec, dict) or any(k not in rec for k in REQUIRED_FIELDS):
        return None, "malformed"
    graph = graphs.get(str(rec["uml_graph_id"]))
    if graph is None:
        return None, "missing graph"
    node = graph.node_by_name(simple_class_name(str(rec["class_name"])))
    if node is None:
        return None, "class not in graph"
    summary = preprocess_summary(first_sentence(str(rec["summary"])))
    if not summary:
        return None, "short summary"
    raw_tokens = tokenize(str(rec["code"]))
    code = preprocess_code(raw_tokens)
    if not code:
        return None, "empty code"
    try:
        tree = from_nested(rec["ast"]) if rec.get("ast") is not None else flat_ast(raw_tokens)
    except AstParseError:
        return None, "malformed"
    sbt = [t if t in ("(", ")") else t.lower() for t in sbt_flatten(tree)]
    class_tokens = normalize_class_name(str(rec["class_name"]))
    inst = SummarizationInstance(
        id=str(rec["id"]),
        code_tokens=code,
        sbt_tokens=sbt,
        class_name_tokens=class_tokens,
        summary_tokens=summary,
        uml_graph_id=str(rec["uml_graph_id"]),
        enclosing_class_node_id=node,
    )
    return inst, None


def preprocess_records(
    records: Iterable[dict], graphs: dict[str, UmlGraph]
) -> tuple[list[SummarizationInstance], dict[str, int]]:
    kept: list[SummarizationInstance] = []
    dropped: Counter[str] = Counter()
    for rec in records:
        inst, reason = preprocess_record(rec, graphs)
        if inst is None:
            dropped[reason] += 1
        else:
            kept.append(inst)
    stats = {"kept": len(kept)}
    stats.update({f"dropped: {r}": dropped.get(r, 0) for r in DROP_REASONS})
    return kept, stats


def build_vocabs(
    instances: list[SummarizationInstance], graphs: dict[str, UmlGraph], cap: int = 10_000
) -> Vocabs:
    """Code, SBT and summary vocabularies; class-name subtokens share the code one."""
    if not instances:
        raise ValueError("no instances to build vocabularies from")
    used = {x.uml_graph_id for x in instances}
    class_tokens = [toks for gid in sorted(used) if gid in graphs for toks in graphs[gid].name_tokens]
    return Vocabs(
        code=build_vocab([x.code_tokens for x in instances] + class_tokens, cap),
        sbt=build_vocab([x.sbt_tokens for x in instances], cap),
        summary=build_vocab([x.summary_tokens for x in instances], cap),
    )
