"""Subtoken splitting, normalization rules and vocabularies."""

from __future__ import annotations

import json
import logging
import re
import string
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .lexer import is_identifier, is_number, is_string, tokenize

log = logging.getLogger(__name__)

PAD, UNK, BOS, EOS, NUM, STRING = range(6)
NUM_TOKEN = "<NUM>"
STRING_TOKEN = "<STRING>"
SPECIALS = ("<pad>", "<unk>", "<s>", "</s>", NUM_TOKEN, STRING_TOKEN)

DEFAULT_MAX_CODE = 150
DEFAULT_MAX_SBT = 500
DEFAULT_MAX_SUMMARY = 30
MIN_SUMMARY_WORDS = 3


def _kind(ch: str) -> str:
    if ch.isdigit():
        return "digit"
    if ch.isupper():
        return "upper"
    return "lower"


def split_subtokens(identifier: str) -> list[str]:
    """Split an identifier on underscores, camel case and letter/digit edges.

    An uppercase run followed by a lowercase letter gives its last capital to
    the next word (``URLParser`` -> url, parser). Characters that are neither
    letters nor digits only separate. Input with no letters or digits comes
    back as one lowercased token.
    """
    words: list[str] = []
    for chunk in re.findall(r"[^\W_]+", identifier):
        start = 0
        for i in range(1, len(chunk)):
            prev, cur = _kind(chunk[i - 1]), _kind(chunk[i])
            nxt = _kind(chunk[i + 1]) if i + 1 < len(chunk) else None
            boundary = (
                (prev == "digit") != (cur == "digit")
                or (prev == "lower" and cur == "upper")
                or (prev == "upper" and cur == "upper" and nxt == "lower")
            )
            if boundary:
                words.append(chunk[start:i])
                start = i
        words.append(chunk[start:])
    if not words:
        return [identifier.lower()] if identifier else []
    return [w.lower() for w in words]


def normalize_class_name(raw: str) -> list[str]:
    name = raw
    # strip generic parameters, innermost first so nesting collapses
    while True:
        stripped = re.sub(r"<[^<>]*>", "", name)
        if stripped == name:
            break
        name = stripped
    name = name.replace("<", "").replace(">", "").strip()
    name = name.rsplit(".", 1)[-1] or name
    return split_subtokens(name)


def preprocess_code(tokens: Iterable[str]) -> list[str]:
    out: list[str] = []
    for tok in tokens:
        if is_string(tok):
            out.append(STRING_TOKEN)
        elif is_number(tok):
            out.append(NUM_TOKEN)
        elif is_identifier(tok):
            out.extend(split_subtokens(tok))
        else:
            out.append(tok.lower())
    return out


_PUNCT = re.compile("[" + re.escape(string.punctuation) + "]")


def preprocess_summary(text: str) -> list[str]:
    """Lowercased subtokens with punctuation removed; [] if under 3 words."""
    words = _PUNCT.sub(" ", text or "").split()
    tokens = [t for w in words for t in split_subtokens(w)]
    if len(tokens) < MIN_SUMMARY_WORDS:
        return []
    return tokens


def first_sentence(text: str) -> str:
    m = re.search(r"\.(\s|$)", text)
    return text[: m.start() + 1] if m else text


@dataclass
class Vocab:
    itos: list[str]
    stoi: dict[str, int] = field(init=False)

    def __post_init__(self):
        if tuple(self.itos[: len(SPECIALS)]) != SPECIALS:
            raise ValueError("vocabulary must start with the special tokens")
        self.stoi = {tok: i for i, tok in enumerate(self.itos)}

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def encode(self, tokens: Iterable[str], max_len: int | None = None) -> list[int]:
        ids = [self.stoi.get(t, UNK) for t in tokens]
        return ids if max_len is None else ids[:max_len]

    def decode(self, ids: Iterable[int]) -> list[str]:
        out = []
        for i in ids:
            if not 0 <= i < len(self.itos):
                raise IndexError(f"token id {i} outside vocabulary of size {len(self.itos)}")
            out.append(self.itos[i])
        return out

    def save(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.itos) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocab":
        lines = Path(path).read_text(encoding="utf-8").split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        return cls(lines)


def build_vocab(corpus: Iterable[Iterable[str]], cap: int = 10_000) -> Vocab:
    """Keep the ``cap`` - 6 most frequent tokens; ties go to the smaller string.

    ``cap`` counts the six specials.
    """
    if cap < len(SPECIALS):
        raise ValueError(f"vocabulary cap {cap} is below the {len(SPECIALS)} special tokens")
    counts: Counter[str] = Counter()
    seen_any = False
    for seq in corpus:
        seen_any = True
        counts.update(t for t in seq if t not in SPECIALS)
    if not seen_any:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    keep = [tok for tok, _ in ranked[: cap - len(SPECIALS)]]
    return Vocab(list(SPECIALS) + keep)


def encode(tokens: Iterable[str], vocab: Vocab, max_len: int | None = None) -> list[int]:
    return vocab.encode(tokens, max_len)


def decode(ids: Iterable[int], vocab: Vocab) -> list[str]:
    return vocab.decode(ids)


@dataclass
class SummarizationInstance:
    id: str
    code_tokens: list[str]
    sbt_tokens: list[str]
    class_name_tokens: list[str]
    summary_tokens: list[str]
    uml_graph_id: str
    enclosing_class_node_id: int

    def validate(self) -> None:
        if len(self.summary_tokens) < MIN_SUMMARY_WORDS:
            raise ValueError(f"{self.id}: summary shorter than {MIN_SUMMARY_WORDS} tokens")
        for name in ("code_tokens", "sbt_tokens", "class_name_tokens"):
            if not getattr(self, name):
                raise ValueError(f"{self.id}: {name} is empty")

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "code_tokens": self.code_tokens,
            "sbt_tokens": self.sbt_tokens,
            "class_name_tokens": self.class_name_tokens,
            "summary_tokens": self.summary_tokens,
            "uml_graph_id": self.uml_graph_id,
            "enclosing_class_node_id": self.enclosing_class_node_id,
        }

    @classmethod
    def from_json(cls, rec: dict) -> "SummarizationInstance":
        return cls(
            id=str(rec["id"]),
            code_tokens=list(rec["code_tokens"]),
            sbt_tokens=list(rec["sbt_tokens"]),
            class_name_tokens=list(rec["class_name_tokens"]),
            summary_tokens=list(rec["summary_tokens"]),
            uml_graph_id=str(rec["uml_graph_id"]),
            enclosing_class_node_id=int(rec["enclosing_class_node_id"]),
        )


def read_jsonl(path: str | Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None


def write_jsonl(path: str | Path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def load_instances(path: str | Path) -> list[SummarizationInstance]:
    return [SummarizationInstance.from_json(r) for r in read_jsonl(path)]


def lex_method(code: str) -> list[str]:
    return tokenize(code)
