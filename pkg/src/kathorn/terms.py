"""KAT term syntax: terms, equations, Horn formulas and the structural
operations on them (Boolean recognition, substitution, negation pushing,
the universal expression)."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Mapping, Union


class NotBooleanError(ValueError):
    """Negation (or a test substitution) applied to a non-Boolean term."""


class Term:
    """Base class for KAT terms.  All subclasses are frozen dataclasses, so
    equality and hashing are structural."""

    __slots__ = ()

    def __str__(self) -> str:
        from .syntax import format_term

        return format_term(self)


@dataclass(frozen=True)
class Zero(Term):
    pass


@dataclass(frozen=True)
class One(Term):
    pass


@dataclass(frozen=True, order=True)
class Prog(Term):
    name: str


@dataclass(frozen=True, order=True)
class Test(Term):
    name: str

    __test__ = False  # not a pytest class


@dataclass(frozen=True)
class Not(Term):
    arg: Term

    def __post_init__(self):
        if not is_boolean(self.arg):
            raise NotBooleanError(f"negation of non-Boolean term {self.arg}")


@dataclass(frozen=True)
class Plus(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class Dot(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class Star(Term):
    arg: Term


ZERO = Zero()
ONE = One()

# Atomic symbols double as their own terms.
Symbol = Union[Prog, Test]


def is_boolean(t: Term) -> bool:
    """True iff ``t`` is built from 0, 1, atomic tests, +, . and negation."""
    if isinstance(t, (Zero, One, Test, Not)):
        # Not is only constructible over Boolean terms.
        return True
    if isinstance(t, (Plus, Dot)):
        return is_boolean(t.left) and is_boolean(t.right)
    return False


def plus_all(terms: Iterable[Term]) -> Term:
    """Left-associated sum; the empty sum is 0."""
    terms = list(terms)
    if not terms:
        return ZERO
    return reduce(Plus, terms)


def dot_all(terms: Iterable[Term]) -> Term:
    """Left-associated product; the empty product is 1."""
    terms = list(terms)
    if not terms:
        return ONE
    return reduce(Dot, terms)


def word_term(word: Iterable[str]) -> Term:
    """The term for a string of program names (1 for the empty string)."""
    return dot_all(Prog(p) for p in word)


def symbols(t: Term) -> tuple[set[str], set[str]]:
    """Program and test names occurring in ``t``."""
    progs: set[str] = set()
    tests: set[str] = set()
    stack = [t]
    while stack:
        x = stack.pop()
        if isinstance(x, Prog):
            progs.add(x.name)
        elif isinstance(x, Test):
            tests.add(x.name)
        elif isinstance(x, (Not, Star)):
            stack.append(x.arg)
        elif isinstance(x, (Plus, Dot)):
            stack.append(x.left)
            stack.append(x.right)
    return progs, tests


def is_test_free(t: Term) -> bool:
    return not symbols(t)[1] and not _has_not(t)


def _has_not(t: Term) -> bool:
    if isinstance(t, Not):
        return True
    if isinstance(t, Star):
        return _has_not(t.arg)
    if isinstance(t, (Plus, Dot)):
        return _has_not(t.left) or _has_not(t.right)
    return False


def size(t: Term) -> int:
    """Number of nodes in the syntax tree."""
    if isinstance(t, (Not, Star)):
        return 1 + size(t.arg)
    if isinstance(t, (Plus, Dot)):
        return 1 + size(t.left) + size(t.right)
    return 1


def universal_expression(programs: Iterable[Union[str, Prog]]) -> Term:
    """``(p1 + ... + pn)*`` over the given programs in lexicographic order.

    An empty program set gives ``0*``.
    """
    names = set()
    for p in programs:
        if isinstance(p, Test):
            raise ValueError(f"test symbol {p.name} in universal expression")
        names.add(p.name if isinstance(p, Prog) else p)
    return Star(plus_all(Prog(n) for n in sorted(names)))


def substitute(t: Term, mapping: Mapping[Symbol, Term]) -> Term:
    """Replace every occurrence of each mapped symbol, homomorphically.

    Test symbols may only be mapped to Boolean terms.
    """
    for sym, repl in mapping.items():
        if isinstance(sym, Test) and not is_boolean(repl):
            raise NotBooleanError(f"non-Boolean replacement {repl} for test {sym.name}")
    if not mapping:
        return t
    return _subst(t, mapping)


def _subst(t: Term, mapping: Mapping[Symbol, Term]) -> Term:
    if isinstance(t, (Prog, Test)):
        return mapping.get(t, t)
    if isinstance(t, Not):
        return Not(_subst(t.arg, mapping))
    if isinstance(t, Star):
        return Star(_subst(t.arg, mapping))
    if isinstance(t, Plus):
        return Plus(_subst(t.left, mapping), _subst(t.right, mapping))
    if isinstance(t, Dot):
        return Dot(_subst(t.left, mapping), _subst(t.right, mapping))
    return t


def push_negations(t: Term) -> Term:
    """Equivalent term in which negation only wraps atomic tests."""
    if isinstance(t, Not):
        return _negate(t.arg)
    if isinstance(t, Star):
        return Star(push_negations(t.arg))
    if isinstance(t, Plus):
        return Plus(push_negations(t.left), push_negations(t.right))
    if isinstance(t, Dot):
        return Dot(push_negations(t.left), push_negations(t.right))
    return t


def _negate(b: Term) -> Term:
    # b is Boolean; returns the pushed form of its complement
    if isinstance(b, Zero):
        return ONE
    if isinstance(b, One):
        return ZERO
    if isinstance(b, Test):
        return Not(b)
    if isinstance(b, Not):
        return push_negations(b.arg)
    if isinstance(b, Plus):
        return Dot(_negate(b.left), _negate(b.right))
    if isinstance(b, Dot):
        return Plus(_negate(b.left), _negate(b.right))
    raise NotBooleanError(f"cannot negate {b}")


@dataclass(frozen=True)
class Signature:
    """Declared program and test names (disjoint, kept sorted)."""

    programs: tuple[str, ...] = ()
    tests: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "programs", tuple(sorted(set(self.programs))))
        object.__setattr__(self, "tests", tuple(sorted(set(self.tests))))
        clash = set(self.programs) & set(self.tests)
        if clash:
            raise ValueError(f"names declared as both program and test: {sorted(clash)}")

    def union(self, other: "Signature") -> "Signature":
        return Signature(self.programs + other.programs, self.tests + other.tests)

    def symbols(self) -> list[Symbol]:
        return [Prog(p) for p in self.programs] + [Test(b) for b in self.tests]

    @classmethod
    def of(cls, *terms: Term) -> "Signature":
        progs: set[str] = set()
        tests: set[str] = set()
        for t in terms:
            p, b = symbols(t)
            progs |= p
            tests |= b
        return cls(tuple(progs), tuple(tests))


EQ = "="
LEQ = "<="


@dataclass(frozen=True)
class Equation:
    lhs: Term
    rhs: Term
    relation: str = EQ

    def __post_init__(self):
        if self.relation not in (EQ, LEQ):
            raise ValueError(f"unknown relation {self.relation!r}")

    def as_eq(self) -> "Equation":
        """``x <= y`` becomes ``x + y = y``; equations are returned as is."""
        if self.relation == EQ:
            return self
        return Equation(Plus(self.lhs, self.rhs), self.rhs, EQ)

    def as_inequalities(self) -> list[tuple[Term, Term]]:
        if self.relation == LEQ:
            return [(self.lhs, self.rhs)]
        return [(self.lhs, self.rhs), (self.rhs, self.lhs)]

    def map(self, fn) -> "Equation":
        return Equation(fn(self.lhs), fn(self.rhs), self.relation)

    def __str__(self) -> str:
        from .syntax import format_equation

        return format_equation(self)


@dataclass(frozen=True)
class HornFormula:
    hypotheses: tuple[Equation, ...]
    conclusion: Equation
    signature: Signature = field(default_factory=Signature)

    def __post_init__(self):
        object.__setattr__(self, "hypotheses", tuple(self.hypotheses))
        used = Signature.of(
            *(t for e in (*self.hypotheses, self.conclusion) for t in (e.lhs, e.rhs))
        )
        object.__setattr__(self, "signature", self.signature.union(used))

    def map(self, fn) -> "HornFormula":
        return HornFormula(
            tuple(e.map(fn) for e in self.hypotheses), self.conclusion.map(fn), self.signature
        )

    def __str__(self) -> str:
        from .syntax import format_formula

        return format_formula(self)
