"""Boolean query language for corpus filtering.

Grammar::

    expr  := or
    or    := and ('OR' and)*
    and   := unary ('AND' unary)*
    unary := 'NOT' unary | '(' expr ')' | PHRASE | TERM

Keywords are case-sensitive: ``and`` is an ordinary term. Chains of the
same operator build one n-ary node; parentheses are kept as ``Group`` so a
pretty-printed query parses back to the identical tree.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Union

from .corpus import NormalizationRules, Tweet, tokenize

KEYWORDS = ("AND", "OR", "NOT")


@dataclass(frozen=True)
class Term:
    text: str


@dataclass(frozen=True)
class Phrase:
    tokens: tuple[str, ...]


@dataclass(frozen=True)
class Not:
    child: Node


@dataclass(frozen=True)
class And:
    children: tuple[Node, ...]


@dataclass(frozen=True)
class Or:
    children: tuple[Node, ...]


@dataclass(frozen=True)
class Group:
    child: Node


Node = Union[Term, Phrase, Not, And, Or, Group]


class QuerySyntaxError(ValueError):
    def __init__(self, message: str, offset: int, expected: set[str]):
        self.offset = offset
        self.expected = frozenset(expected)
        super().__init__(f"{message} at byte offset {offset} (expected one of: {', '.join(sorted(self.expected))})")


# --------------------------------------------------------------------------
# lexer
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class _Tok:
    kind: str  # WORD, PHRASE, LPAREN, RPAREN, AND, OR, NOT, EOF
    value: str
    offset: int  # byte offset into the UTF-8 source


def _lex(src: str) -> list[_Tok]:
    toks: list[_Tok] = []
    i, n = 0, len(src)
    byte_at = [0] * (n + 1)
    for k, ch in enumerate(src):
        byte_at[k + 1] = byte_at[k] + len(ch.encode("utf-8"))
    while i < n:
        ch = src[i]
        if ch.isspace():
            i += 1
        elif ch in "()":
            toks.append(_Tok("LPAREN" if ch == "(" else "RPAREN", ch, byte_at[i]))
            i += 1
        elif ch == '"':
            j = src.find('"', i + 1)
            if j < 0:
                raise QuerySyntaxError("unterminated phrase", byte_at[n], {'"'})
            toks.append(_Tok("PHRASE", src[i + 1 : j], byte_at[i]))
            i = j + 1
        else:
            j = i
            while j < n and not src[j].isspace() and src[j] not in '()"':
                j += 1
            word = src[i:j]
            kind = word if word in KEYWORDS else "WORD"
            toks.append(_Tok(kind, word, byte_at[i]))
            i = j
    toks.append(_Tok("EOF", "", byte_at[n]))
    return toks


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

_UNARY_START = {"NOT", "(", "PHRASE", "TERM"}


class _Parser:
    def __init__(self, src: str, rules: NormalizationRules | None):
        self.toks = _lex(src)
        self.pos = 0
        self.rules = rules

    def peek(self) -> _Tok:
        return self.toks[self.pos]

    def take(self) -> _Tok:
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def fail(self, expected: set[str], message: str = "unexpected token") -> None:
        tok = self.peek()
        what = "end of input" if tok.kind == "EOF" else repr(tok.value)
        raise QuerySyntaxError(f"{message} {what}", tok.offset, expected)

    def parse(self) -> Node:
        if self.peek().kind == "EOF":
            raise QuerySyntaxError("empty query", 0, _UNARY_START)
        node = self.parse_or()
        if self.peek().kind != "EOF":
            self.fail({"AND", "OR", "end of input"})
        return node

    def parse_or(self) -> Node:
        items = [self.parse_and()]
        while self.peek().kind == "OR":
            self.take()
            items.append(self.parse_and())
        return items[0] if len(items) == 1 else Or(tuple(items))

    def parse_and(self) -> Node:
        items = [self.parse_unary()]
        while self.peek().kind == "AND":
            self.take()
            items.append(self.parse_unary())
        return items[0] if len(items) == 1 else And(tuple(items))

    def parse_unary(self) -> Node:
        tok = self.peek()
        if tok.kind == "NOT":
            self.take()
            return Not(self.parse_unary())
        if tok.kind == "LPAREN":
            self.take()
            inner = self.parse_or()
            if self.peek().kind != "RPAREN":
                self.fail({")", "AND", "OR"})
            self.take()
            return Group(inner)
        if tok.kind in ("WORD", "PHRASE"):
            self.take()
            text = self.rules.apply(tok.value) if self.rules is not None else tok.value
            words = tuple(tokenize(text))
            if not words:
                raise QuerySyntaxError("empty term or phrase", tok.offset, _UNARY_START)
            if tok.kind == "WORD" and len(words) == 1:
                return Term(words[0])
            return Phrase(words)
        self.fail(_UNARY_START)
        raise AssertionError  # unreachable


def parse_query(src: str, rules: NormalizationRules | None = None) -> Node:
    """Parse a Boolean query; leaves are normalized with ``rules`` and tokenized."""
    return _Parser(src, rules).parse()


def pretty_print(node: Node) -> str:
    if isinstance(node, Term):
        return node.text
    if isinstance(node, Phrase):
        return '"' + " ".join(node.tokens) + '"'
    if isinstance(node, Not):
        return "NOT " + pretty_print(node.child)
    if isinstance(node, Group):
        return "(" + pretty_print(node.child) + ")"
    if isinstance(node, And):
        return " AND ".join(pretty_print(c) for c in node.children)
    if isinstance(node, Or):
        return " OR ".join(pretty_print(c) for c in node.children)
    raise TypeError(f"not a query node: {node!r}")


def load_queries(path: str | Path, rules: NormalizationRules | None = None) -> list[Node]:
    """One query per line; blank lines and '//'-comment lines are skipped.

    '#' cannot mark comments because queries may start with a hashtag.
    """
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("//"):
                continue
            try:
                out.append(parse_query(s, rules))
            except QuerySyntaxError as exc:
                raise QuerySyntaxError(f"{path}:{lineno}: {exc.args[0]}", exc.offset, set(exc.expected)) from None
    return out


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------


def _contains_run(tokens: tuple[str, ...], run: tuple[str, ...]) -> bool:
    k = len(run)
    first = run[0]
    for i in range(len(tokens) - k + 1):
        if tokens[i] == first and tokens[i : i + k] == run:
            return True
    return False


def eval_with(node: Node, leaf: Callable[[Term | Phrase], bool]) -> bool:
    """Evaluate ``node`` with an arbitrary truth assignment for its leaves."""
    if isinstance(node, (Term, Phrase)):
        return leaf(node)
    if isinstance(node, Not):
        return not eval_with(node.child, leaf)
    if isinstance(node, Group):
        return eval_with(node.child, leaf)
    if isinstance(node, And):
        return all(eval_with(c, leaf) for c in node.children)
    if isinstance(node, Or):
        return any(eval_with(c, leaf) for c in node.children)
    raise TypeError(f"not a query node: {node!r}")


def eval_query(q: Node, t: Tweet) -> bool:
    tokens = t.tokens
    token_set = set(tokens)

    def leaf(n: Term | Phrase) -> bool:
        if isinstance(n, Term):
            return n.text in token_set
        return _contains_run(tokens, n.tokens)

    return eval_with(q, leaf)


def leaves(node: Node) -> list[Term | Phrase]:
    if isinstance(node, (Term, Phrase)):
        return [node]
    if isinstance(node, (Not, Group)):
        return leaves(node.child)
    return [leaf for c in node.children for leaf in leaves(c)]
