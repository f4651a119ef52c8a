"""Class-relationship graphs recovered from Java sources by a lexical scan."""

from __future__ import annotations

import json
import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable

from .lexer import is_identifier, tokenize
from .preprocess import normalize_class_name

log = logging.getLogger(__name__)


class Relation(str, Enum):
    REALIZATION = "REALIZATION"
    GENERALIZATION = "GENERALIZATION"
    DEPENDENCY = "DEPENDENCY"
    ASSOCIATION = "ASSOCIATION"


RELATIONS = tuple(Relation)

# UMLGraph spellings
_ALIASES = {
    "IMPLEMENTS": Relation.REALIZATION,
    "EXTENDS": Relation.GENERALIZATION,
    "DEPEND": Relation.DEPENDENCY,
    "ASSOC": Relation.ASSOCIATION,
    "NAVASSOC": Relation.ASSOCIATION,
}


def parse_relation(text: str) -> Relation:
    key = text.strip().upper()
    if key in _ALIASES:
        return _ALIASES[key]
    try:
        return Relation(key)
    except ValueError:
        raise ValueError(f"unknown relation {text!r}") from None


_MODIFIERS = {
    "public", "protected", "private", "static", "final", "abstract", "native",
    "synchronized", "transient", "volatile", "strictfp", "default", "sealed",
    "non-sealed",
}
_DECL_KEYWORDS = {"class", "interface", "enum", "record"}
_PRIMITIVES = {
    "void", "int", "long", "short", "byte", "char", "boolean", "float", "double", "var",
}
_STATEMENT_KEYWORDS = {
    "return", "throw", "new", "if", "else", "for", "while", "do", "switch", "case",
    "try", "catch", "finally", "break", "continue", "this", "super", "assert", "yield",
    "instanceof", "import", "package", "throws",
}


@dataclass
class ClassRecord:
    name: str
    kind: str = "class"
    path: str = ""
    extends: list[str] = field(default_factory=list)
    implements: list[str] = field(default_factory=list)
    fields: list[str] = field(default_factory=list)
    signature_types: list[str] = field(default_factory=list)
    local_types: list[str] = field(default_factory=list)


ClassIndex = dict  # simple name -> ClassRecord, in declaration order


def _skip_balanced(toks: list[str], i: int, open_: str, close: str) -> int:
    """Index just past the bracket group starting at ``toks[i] == open_``."""
    depth = 0
    while i < len(toks):
        t = toks[i]
        if t == open_:
            depth += 1
        elif t == close:
            depth -= 1
            if depth == 0:
                return i + 1
        elif open_ == "<" and t in (">>", ">>>"):
            depth -= len(t)
            if depth <= 0:
                return i + 1
        i += 1
    return i


def _read_type(toks: list[str], i: int) -> tuple[str | None, int]:
    """Read ``a.b.Name<...>[]`` starting at ``i``; return simple name and end."""
    if i >= len(toks) or not is_identifier(toks[i]):
        return None, i
    name = toks[i]
    i += 1
    while i + 1 < len(toks) and toks[i] == "." and is_identifier(toks[i + 1]):
        name = toks[i + 1]
        i += 2
    if i < len(toks) and toks[i] == "<":
        i = _skip_balanced(toks, i, "<", ">")
    while i + 1 < len(toks) and toks[i] == "[" and toks[i + 1] == "]":
        i += 2
    if i < len(toks) and toks[i] == "...":
        i += 1
    return name, i


def _strip_annotations(toks: list[str]) -> list[str]:
    out, i = [], 0
    while i < len(toks):
        if toks[i] == "@" and i + 1 < len(toks) and toks[i + 1] != "interface":
            _, i = _read_type(toks, i + 1)
            if i < len(toks) and toks[i] == "(":
                i = _skip_balanced(toks, i, "(", ")")
            continue
        out.append(toks[i])
        i += 1
    return out


def _type_list(toks: list[str]) -> list[str]:
    names, i = [], 0
    while i < len(toks):
        name, j = _read_type(toks, i)
        if name is None:
            i += 1
            continue
        names.append(name)
        i = j
    return names


def _parse_header(toks: list[str], rec: ClassRecord) -> None:
    i = 0
    if i < len(toks) and toks[i] == "<":
        i = _skip_balanced(toks, i, "<", ">")
    sections: dict[str, list[str]] = {}
    current = None
    depth = 0
    while i < len(toks):
        t = toks[i]
        if t in ("extends", "implements", "permits") and depth == 0:
            current = t
            sections.setdefault(t, [])
        elif current is not None:
            if t == "<":
                depth += 1
            elif t == ">":
                depth -= 1
            elif t in (">>", ">>>"):
                depth -= len(t)
            if depth == 0 and t != ">" and t not in (">>", ">>>"):
                sections[current].append(t)
        i += 1
    supers = _type_list(sections.get("extends", []))
    impls = _type_list(sections.get("implements", []))
    if rec.kind == "interface":
        # an interface extending interfaces is a generalization
        rec.extends = supers
    else:
        rec.extends = supers[:1]
        rec.implements = impls


def _member_types(member: list[str], rec: ClassRecord) -> None:
    """Classify one class-body member: field types or method signature types."""
    toks = [t for t in member if t not in _MODIFIERS]
    if not toks:
        return
    if toks[0] == "<":
        toks = toks[_skip_balanced(toks, 0, "<", ">"):]
    eq = toks.index("=") if "=" in toks else len(toks)
    head = toks[:eq]
    if "(" in head:
        p = head.index("(")
        ret, _ = _read_type(head, 0)
        if p >= 2 and ret is not None and ret not in _PRIMITIVES:
            rec.signature_types.append(ret)
        close = _skip_balanced(head, p, "(", ")")
        params = head[p + 1 : close - 1]
        for chunk in _split_top(params, ","):
            chunk = [t for t in chunk if t != "final"]
            name, _ = _read_type(chunk, 0)
            if name is not None and name not in _PRIMITIVES:
                rec.signature_types.append(name)
        return
    name, j = _read_type(head, 0)
    if name is not None and j < len(head) and is_identifier(head[j]):
        if name not in _PRIMITIVES:
            rec.fields.append(name)


def _split_top(toks: list[str], sep: str) -> list[list[str]]:
    out, cur, depth = [], [], 0
    for t in toks:
        if t in ("<", "(", "["):
            depth += 1
        elif t in (">", ")", "]"):
            depth -= 1
        elif t in (">>", ">>>"):
            depth -= len(t)
        if t == sep and depth == 0:
            out.append(cur)
            cur = []
        else:
            cur.append(t)
    if cur:
        out.append(cur)
    return out


def _body_local_types(body: list[str], rec: ClassRecord) -> None:
    """Types of local declarations (``Type name =|;|,|:``) and ``new Type``."""
    n = len(body)
    for i, t in enumerate(body):
        if t == "new" and i + 1 < n:
            name, _ = _read_type(body, i + 1)
            if name and name not in _PRIMITIVES:
                rec.local_types.append(name)
            continue
        if not is_identifier(t) or t in _STATEMENT_KEYWORDS or t in _PRIMITIVES:
            continue
        if i > 0 and body[i - 1] == ".":
            continue
        name, j = _read_type(body, i)
        if name is None or j >= n - 1:
            continue
        if is_identifier(body[j]) and body[j] not in _STATEMENT_KEYWORDS and body[j + 1] in ("=", ";", ",", ":", ")"):
            rec.local_types.append(name)


def scan_source(text: str, path: str = "") -> list[ClassRecord]:
    """Top-level class and interface declarations in one compilation unit."""
    toks = _strip_annotations(tokenize(text))
    records: list[ClassRecord] = []
    i, n = 0, len(toks)
    depth = 0
    while i < n:
        t = toks[i]
        if t == "{":
            depth += 1
        elif t == "}":
            depth -= 1
        elif depth == 0 and t in _DECL_KEYWORDS and i + 1 < n and is_identifier(toks[i + 1]):
            rec = ClassRecord(name=toks[i + 1], kind=t, path=path)
            j = i + 2
            while j < n and toks[j] != "{":
                j += 1
            _parse_header(toks[i + 2 : j], rec)
            end = _skip_balanced(toks, j, "{", "}")
            _scan_body(toks[j + 1 : end - 1], rec)
            records.append(rec)
            i = end
            continue
        i += 1
    return records


def _scan_body(body: list[str], rec: ClassRecord) -> None:
    member: list[str] = []
    i, n = 0, len(body)
    while i < n:
        t = body[i]
        if t == "{":
            end = _skip_balanced(body, i, "{", "}")
            nested = any(k in _DECL_KEYWORDS for k in member)
            if not nested and "=" in member and "(" not in member[: member.index("=")]:
                # array, lambda or anonymous-class initializer of a field
                member.extend(body[i:end])
                i = end
                continue
            if not nested:
                if member:
                    _member_types(member, rec)
                _body_local_types(body[i + 1 : end - 1], rec)
            member = []
            i = end
            continue
        if t == ";":
            if member:
                _member_types(member, rec)
            member = []
        else:
            member.append(t)
        i += 1
    if member:
        _member_types(member, rec)


def scan_project(paths: Iterable[str | Path]) -> ClassIndex:
    """Index top-level declarations across files; first declaration wins."""
    index: ClassIndex = {}
    for path in sorted(Path(p) for p in paths):
        try:
            text = path.read_text(encoding="utf-8", errors="replace")
        except OSError as exc:
            log.warning("skipping unreadable file %s: %s", path, exc)
            continue
        for rec in scan_source(text, str(path)):
            if rec.name in index:
                log.warning(
                    "duplicate class %s in %s; keeping %s", rec.name, path, index[rec.name].path
                )
                continue
            index[rec.name] = rec
    return index


def java_files(project_dir: str | Path) -> list[Path]:
    return sorted(p for p in Path(project_dir).rglob("*.java") if p.is_file())


@dataclass
class UmlGraph:
    names: list[str]
    name_tokens: list[list[str]]
    edges: list[tuple[int, int, Relation]]
    ids: list[int] | None = None

    def __post_init__(self):
        if self.ids is None:
            self.ids = list(range(len(self.names)))
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("duplicate node ids")
        self._pos = {nid: k for k, nid in enumerate(self.ids)}
        seen = set()
        clean = []
        for s, d, r in self.edges:
            r = r if isinstance(r, Relation) else parse_relation(r)
            if s not in self._pos or d not in self._pos:
                raise ValueError(f"edge ({s}, {d}) references a missing node")
            if (s, d, r) in seen:
                continue
            seen.add((s, d, r))
            clean.append((s, d, r))
        self.edges = clean

    def __len__(self) -> int:
        return len(self.ids)

    def position(self, node_id: int) -> int:
        try:
            return self._pos[node_id]
        except KeyError:
            raise KeyError(f"unknown class node {node_id}") from None

    def node_by_name(self, name: str) -> int | None:
        for nid, nm in zip(self.ids, self.names):
            if nm == name:
                return nid
        return None

    def relation_counts(self) -> dict[str, int]:
        counts = {r.value: 0 for r in RELATIONS}
        for _, _, r in self.edges:
            counts[r.value] += 1
        return counts

    def edge_set(self) -> set[tuple[str, str, str]]:
        names = dict(zip(self.ids, self.names))
        return {(names[s], names[d], r.value) for s, d, r in self.edges}

    def to_json(self) -> dict:
        return {
            "nodes": [
                {"id": nid, "name": nm, "name_tokens": toks}
                for nid, nm, toks in zip(self.ids, self.names, self.name_tokens)
            ],
            "edges": [{"src": s, "dst": d, "relation": r.value} for s, d, r in self.edges],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "UmlGraph":
        nodes = obj["nodes"]
        return cls(
            names=[n["name"] for n in nodes],
            name_tokens=[list(n.get("name_tokens") or normalize_class_name(n["name"])) for n in nodes],
            edges=[(int(e["src"]), int(e["dst"]), parse_relation(e["relation"])) for e in obj["edges"]],
            ids=[int(n["id"]) for n in nodes],
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "UmlGraph":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def extract_relations(index: ClassIndex) -> UmlGraph:
    names = list(index)
    ids = {nm: k for k, nm in enumerate(names)}
    edges: list[tuple[int, int, Relation]] = []

    def link(src: str, dst: str, rel: Relation) -> None:
        if dst in ids and dst != src:
            edges.append((ids[src], ids[dst], rel))

    for name, rec in index.items():
        for sup in rec.extends:
            link(name, sup, Relation.GENERALIZATION)
        for itf in rec.implements:
            link(name, itf, Relation.REALIZATION)
        field_types = list(dict.fromkeys(rec.fields))
        for ft in field_types:
            link(name, ft, Relation.ASSOCIATION)
        for dt in dict.fromkeys(rec.signature_types + rec.local_types):
            if dt not in field_types:
                link(name, dt, Relation.DEPENDENCY)
    return UmlGraph(names, [normalize_class_name(n) for n in names], edges)


def subgraph_for_method(graph: UmlGraph, class_node: int, radius: int = 2) -> UmlGraph:
    """Induced subgraph of nodes within ``radius`` undirected hops."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    graph.position(class_node)
    nbrs: dict[int, set[int]] = {nid: set() for nid in graph.ids}
    for s, d, _ in graph.edges:
        nbrs[s].add(d)
        nbrs[d].add(s)
    dist = {class_node: 0}
    queue = deque([class_node])
    while queue:
        v = queue.popleft()
        if dist[v] == radius:
            continue
        for u in nbrs[v]:
            if u not in dist:
                dist[u] = dist[v] + 1
                queue.append(u)
    keep = [nid for nid in graph.ids if nid in dist]
    kept = set(keep)
    pos = [graph.position(nid) for nid in keep]
    return UmlGraph(
        names=[graph.names[p] for p in pos],
        name_tokens=[graph.name_tokens[p] for p in pos],
        edges=[(s, d, r) for s, d, r in graph.edges if s in kept and d in kept],
        ids=keep,
    )


def extract_project(project_dir: str | Path) -> UmlGraph:
    return extract_relations(scan_project(java_files(project_dir)))
