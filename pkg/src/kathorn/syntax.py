"""Concrete syntax for terms, equations and Horn formulas.

Terms::

    sum   := prod ('+' prod)*
    prod  := post ((';')? post)*        juxtaposition also means product
    post  := unary '*'*
    unary := ('!' | '~') unary | '0' | '1' | IDENT | '(' sum ')'

An equation is ``sum ('=' | '<=') sum``; a one-line formula is
``eq ('&' eq)* '->' eq``.  Horn files hold ``program``, ``test``, ``hyp``
and ``show`` lines, with ``#`` comments.
"""

from __future__ import annotations

import re
from typing import Iterable, Optional, Union

from .terms import (
    EQ,
    LEQ,
    ONE,
    ZERO,
    Dot,
    Equation,
    HornFormula,
    Not,
    NotBooleanError,
    One,
    Plus,
    Prog,
    Signature,
    Star,
    Term,
    Test,
    Zero,
)


class ParseError(ValueError):
    def __init__(self, message: str, pos: int = -1, line: Optional[int] = None):
        self.pos = pos
        self.line = line
        where = f" at position {pos}" if pos >= 0 else ""
        if line is not None:
            where += f" (line {line})"
        super().__init__(message + where)


_TOKEN = re.compile(
    r"\s*(?:(?P<ident>[A-Za-z_][A-Za-z0-9_']*)|(?P<const>[01])|(?P<op><=|->|[+;*!~()=&]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            bad = len(text[pos:]) - len(text[pos:].lstrip()) + pos
            raise ParseError(f"unexpected character {text[bad]!r}", bad)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


_UNARY_START = {"(", "!", "~"}


class _Parser:
    def __init__(self, text: str, signature: Signature):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.tests = set(signature.tests)
        self.seen_programs: set[str] = set()

    def peek(self):
        return self.tokens[self.i]

    def take(self, value: Optional[str] = None):
        tok = self.tokens[self.i]
        if value is not None and tok[1] != value:
            found = tok[1] or "end of input"
            raise ParseError(f"expected {value!r}, found {found!r}", tok[2])
        self.i += 1
        return tok

    def at_unary_start(self) -> bool:
        kind, val, _ = self.peek()
        return kind in ("ident", "const") or val in _UNARY_START

    def sum(self) -> Term:
        t = self.prod()
        while self.peek()[1] == "+":
            self.take()
            t = Plus(t, self.prod())
        return t

    def prod(self) -> Term:
        t = self.post()
        while True:
            if self.peek()[1] == ";":
                self.take()
                t = Dot(t, self.post())
            elif self.at_unary_start():
                t = Dot(t, self.post())
            else:
                return t

    def post(self) -> Term:
        t = self.unary()
        while self.peek()[1] == "*":
            self.take()
            t = Star(t)
        return t

    def unary(self) -> Term:
        kind, val, pos = self.peek()
        if val in ("!", "~"):
            self.take()
            arg = self.unary()
            try:
                return Not(arg)
            except NotBooleanError as exc:
                raise ParseError(f"NotBoolean: {exc}", pos) from None
        if kind == "const":
            self.take()
            return ZERO if val == "0" else ONE
        if kind == "ident":
            self.take()
            if val in self.tests:
                return Test(val)
            self.seen_programs.add(val)
            return Prog(val)
        if val == "(":
            self.take()
            t = self.sum()
            self.take(")")
            return t
        found = val or "end of input"
        raise ParseError(f"unexpected {found!r}", pos)

    def equation(self) -> Equation:
        lhs = self.sum()
        kind, val, pos = self.peek()
        if val not in ("=", "<="):
            raise ParseError(f"expected '=' or '<=', found {val or 'end of input'!r}", pos)
        self.take()
        return Equation(lhs, self.sum(), EQ if val == "=" else LEQ)

    def expect_end(self):
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected trailing {val!r}", pos)


def _has_op(tokens, op: str) -> bool:
    return any(t[0] == "op" and t[1] == op for t in tokens)


def parse(
    text: str, signature: Optional[Signature] = None
) -> Union[Term, Equation, HornFormula]:
    """Parse a term, an equation, or a one-line Horn formula.

    Identifiers named as tests in ``signature`` are tests; every other
    identifier is a program.
    """
    signature = signature or Signature()
    p = _Parser(text, signature)
    if _has_op(p.tokens, "->"):
        hyps = []
        if p.peek()[1] != "->":
            hyps.append(p.equation())
            while p.peek()[1] == "&":
                p.take()
                hyps.append(p.equation())
        p.take("->")
        concl = p.equation()
        p.expect_end()
        sig = signature.union(Signature(tuple(p.seen_programs)))
        return HornFormula(tuple(hyps), concl, sig)
    if _has_op(p.tokens, "=") or _has_op(p.tokens, "<="):
        e = p.equation()
        p.expect_end()
        return e
    t = p.sum()
    p.expect_end()
    return t


def parse_term(text: str, tests: Iterable[str] = ()) -> Term:
    t = parse(text, Signature(tests=tuple(tests)))
    if not isinstance(t, Term):
        raise ParseError("expected a term")
    return t


def parse_equation(text: str, tests: Iterable[str] = ()) -> Equation:
    e = parse(text, Signature(tests=tuple(tests)))
    if not isinstance(e, Equation):
        raise ParseError("expected an equation")
    return e


def parse_horn(text: str) -> HornFormula:
    """Parse the line-oriented Horn file format."""
    programs: list[str] = []
    tests: list[str] = []
    hyp_lines: list[tuple[int, str]] = []
    show: Optional[tuple[int, str]] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        keyword, _, rest = line.partition(" ")
        rest = rest.strip()
        if keyword == "program":
            programs.extend(rest.split())
        elif keyword == "test":
            tests.extend(rest.split())
        elif keyword == "hyp":
            hyp_lines.append((lineno, rest))
        elif keyword == "show":
            if show is not None:
                raise ParseError("more than one 'show' line", line=lineno)
            show = (lineno, rest)
        else:
            raise ParseError(f"unknown directive {keyword!r}", line=lineno)
    if show is None:
        raise ParseError("missing 'show' line")
    try:
        sig = Signature(tuple(programs), tuple(tests))
    except ValueError as exc:
        raise ParseError(str(exc)) from None

    def eq(lineno: int, src: str) -> Equation:
        try:
            e = parse(src, sig)
        except ParseError as exc:
            raise ParseError(str(exc), line=lineno) from None
        if not isinstance(e, Equation):
            raise ParseError("expected an equation", line=lineno)
        return e

    hyps = tuple(eq(n, s) for n, s in hyp_lines)
    return HornFormula(hyps, eq(*show), sig)


# -- printing ---------------------------------------------------------------

_PREC = {Plus: 0, Dot: 1, Star: 2, Not: 3}


def _prec(t: Term) -> int:
    return _PREC.get(type(t), 4)


def format_term(t: Term) -> str:
    return _fmt(t)


def _wrap(t: Term, min_prec: int) -> str:
    s = _fmt(t)
    return f"({s})" if _prec(t) < min_prec else s


def _fmt(t: Term) -> str:
    if isinstance(t, Zero):
        return "0"
    if isinstance(t, One):
        return "1"
    if isinstance(t, (Prog, Test)):
        return t.name
    if isinstance(t, Plus):
        return f"{_wrap(t.left, 0)} + {_wrap(t.right, 1)}"
    if isinstance(t, Dot):
        return f"{_wrap(t.left, 1)};{_wrap(t.right, 2)}"
    if isinstance(t, Star):
        return f"{_wrap(t.arg, 2)}*"
    if isinstance(t, Not):
        return f"!{_wrap(t.arg, 3)}"
    raise TypeError(f"not a term: {t!r}")


def format_equation(e: Equation) -> str:
    return f"{format_term(e.lhs)} {e.relation} {format_term(e.rhs)}"


def format_formula(f: HornFormula) -> str:
    hyps = " & ".join(format_equation(e) for e in f.hypotheses)
    concl = format_equation(f.conclusion)
    return f"{hyps} -> {concl}" if hyps else f"-> {concl}"


def format_horn(f: HornFormula) -> str:
    """Render ``f`` in the Horn file format (round-trips through parse_horn)."""
    lines = []
    if f.signature.programs:
        lines.append("program " + " ".join(f.signature.programs))
    if f.signature.tests:
        lines.append("test " + " ".join(f.signature.tests))
    lines += [f"hyp {format_equation(e)}" for e in f.hypotheses]
    lines.append(f"show {format_equation(f.conclusion)}")
    return "\n".join(lines) + "\n"
