"""AST exchange format and structure-based traversal (SBT) flattening."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .lexer import is_identifier, is_number, is_string


class AstParseError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


@dataclass
class AstNode:
    label: str
    children: list["AstNode"] = field(default_factory=list)

    def size(self) -> int:
        count, stack = 0, [self]
        while stack:
            node = stack.pop()
            count += 1
            stack.extend(node.children)
        return count

    def to_nested(self) -> list:
        return [self.label, [c.to_nested() for c in self.children]]


def parse_ast(serialized: str) -> AstNode:
    """Read a tree written as nested ``[label, [children...]]`` JSON lists."""
    try:
        obj = json.loads(serialized)
    except json.JSONDecodeError as exc:
        raise AstParseError(f"malformed AST text: {exc.msg}", exc.pos) from None
    return from_nested(obj)


def from_nested(obj, _pos: str = "$") -> AstNode:
    if not (isinstance(obj, list) and len(obj) == 2):
        raise AstParseError(f"expected [label, children] at {_pos}", 0)
    label, children = obj
    if not isinstance(label, str) or not label:
        raise AstParseError(f"label must be a non-empty string at {_pos}", 0)
    if not isinstance(children, list):
        raise AstParseError(f"children must be a list at {_pos}", 0)
    return AstNode(label, [from_nested(c, f"{_pos}[1][{i}]") for i, c in enumerate(children)])


def sbt_flatten(root: AstNode) -> list[str]:
    out: list[str] = []
    # iterative so deep trees do not hit the recursion limit
    stack: list[tuple[AstNode, bool]] = [(root, False)]
    while stack:
        node, closing = stack.pop()
        if closing:
            out.extend((")", node.label))
            continue
        out.extend(("(", node.label))
        stack.append((node, True))
        for child in reversed(node.children):
            stack.append((child, False))
    return out


def sbt_parse(tokens: list[str]) -> AstNode:
    """Rebuild the tree from an SBT sequence; inverse of :func:`sbt_flatten`."""
    if not tokens:
        raise AstParseError("empty SBT sequence", 0)
    stack: list[AstNode] = []
    root = None
    i = 0
    n = len(tokens)
    while i < n:
        tok = tokens[i]
        if tok == "(":
            if i + 1 >= n:
                raise AstParseError("missing label after '('", i)
            if root is not None and not stack:
                raise AstParseError("content after the root closed", i)
            node = AstNode(tokens[i + 1])
            if stack:
                stack[-1].children.append(node)
            else:
                root = node
            stack.append(node)
            i += 2
        elif tok == ")":
            if not stack:
                raise AstParseError("unbalanced ')'", i)
            if i + 1 >= n:
                raise AstParseError("missing label after ')'", i)
            node = stack.pop()
            if tokens[i + 1] != node.label:
                raise AstParseError(
                    f"closing label {tokens[i + 1]!r} does not match {node.label!r}", i + 1
                )
            i += 2
        else:
            raise AstParseError(f"unexpected token {tok!r}", i)
    if stack:
        raise AstParseError("unclosed '('", n)
    return root


def _leaf_label(tok: str) -> str:
    if is_string(tok):
        return "<STRING>"
    if is_number(tok):
        return "<NUM>"
    return tok.lower() if is_identifier(tok) else tok


def flat_ast(code_tokens: list[str]) -> AstNode:
    """Fallback tree for when no parser output is available.

    method -> block -> one ``statement`` node per ``;``/brace-delimited
    statement, whose leaves are the statement's tokens (parentheses and braces
    dropped so labels never collide with SBT brackets).
    """
    statements: list[AstNode] = []
    current: list[AstNode] = []
    for tok in code_tokens:
        if tok in ("(", ")", "{", "}"):
            if tok in "{}" and current:
                statements.append(AstNode("statement", current))
                current = []
            continue
        current.append(AstNode(_leaf_label(tok)))
        if tok == ";":
            statements.append(AstNode("statement", current))
            current = []
    if current:
        statements.append(AstNode("statement", current))
    return AstNode("method", [AstNode("block", statements)])
