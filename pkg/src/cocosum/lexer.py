"""Declaration-level Java lexer shared by code preprocessing and UML scanning."""

from __future__ import annotations

import re

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*|/\*.*?\*/)
  | (?P<string>"(?:\\.|[^"\\\n])*"|'(?:\\.|[^'\\\n])*')
  | (?P<number>0[xX][0-9a-fA-F_]+[lL]?|(?:\d[\d_]*\.?[\d_]*|\.\d[\d_]*)(?:[eE][+-]?\d+)?[fFdDlL]?)
  | (?P<ident>[A-Za-z_$][\w$]*)
  | (?P<op>>>>=|<<=|>>=|->|::|\+\+|--|&&|\|\||[=!<>+\-*/%&|^]=|\.\.\.|[{}()\[\];,.@=<>!~?:+\-*/&|^%])
  | (?P<other>.)
    """,
    re.VERBOSE | re.DOTALL,
)

NUMBER_RE = re.compile(
    r"^(?:0[xX][0-9a-fA-F_]+[lL]?|(?:\d[\d_]*\.?[\d_]*|\.\d[\d_]*)(?:[eE][+-]?\d+)?[fFdDlL]?)$"
)


def tokenize(source: str) -> list[str]:
    """Split Java-like source into tokens, dropping whitespace and comments."""
    out = []
    for m in _TOKEN_RE.finditer(source):
        kind = m.lastgroup
        if kind in ("ws", "comment"):
            continue
        out.append(m.group())
    return out


def is_identifier(tok: str) -> bool:
    return bool(tok) and (tok[0].isalpha() or tok[0] in "_$")


def is_number(tok: str) -> bool:
    return bool(NUMBER_RE.match(tok))


def is_string(tok: str) -> bool:
    return len(tok) >= 2 and tok[0] in "\"'" and tok[-1] == tok[0]
