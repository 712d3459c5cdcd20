"""Finite relational KAT interpretations.

A relation on ``X = {0, ..., n-1}`` is stored as a tuple of ``n`` row
bitmasks: bit ``j`` of ``rows[i]`` is set iff ``(i, j)`` is in the relation.
Tests are sub-identities and are stored in interpretations as plain subset
masks of ``X``.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional, Sequence

from .decide import GuardedWord
from .terms import (
    Dot,
    Equation,
    HornFormula,
    Not,
    One,
    Plus,
    Prog,
    Signature,
    Star,
    Term,
    Test,
    Zero,
    universal_expression,
)

Rel = tuple  # tuple[int, ...] of row masks


class UndeclaredSymbol(KeyError):
    pass


class CapExceeded(RuntimeError):
    pass


class QuotientAuditError(AssertionError):
    """A check of the quotient construction failed (an implementation bug)."""


# -- relation algebra on row masks --------------------------------------------


def rel_empty(n: int) -> Rel:
    return (0,) * n


def rel_id(n: int) -> Rel:
    return tuple(1 << i for i in range(n))


def rel_full(n: int) -> Rel:
    return ((1 << n) - 1,) * n


def rel_union(a: Rel, b: Rel) -> Rel:
    return tuple(x | y for x, y in zip(a, b))


def rel_compose(a: Rel, b: Rel) -> Rel:
    out = []
    for row in a:
        acc = 0
        j = 0
        while row:
            if row & 1:
                acc |= b[j]
            row >>= 1
            j += 1
        out.append(acc)
    return tuple(out)


def rel_star(a: Rel) -> Rel:
    """Reflexive-transitive closure by squaring ``1 + a`` to a fixpoint."""
    x = rel_union(rel_id(len(a)), a)
    while True:
        y = rel_compose(x, x)
        if y == x:
            return x
        x = y


def rel_leq(a: Rel, b: Rel) -> bool:
    return all(x & ~y == 0 for x, y in zip(a, b))


def rel_diag(mask: int, n: int) -> Rel:
    return tuple((1 << i) & mask for i in range(n))


def rel_complement_test(a: Rel) -> Rel:
    """``id - a`` for a sub-identity ``a``."""
    return tuple((1 << i) & ~row for i, row in enumerate(a))


def rel_from_pairs(n: int, pairs: Iterable[tuple[int, int]]) -> Rel:
    rows = [0] * n
    for i, j in pairs:
        rows[i] |= 1 << j
    return tuple(rows)


def rel_pairs(a: Rel) -> set[tuple[int, int]]:
    n = len(a)
    return {(i, j) for i in range(n) for j in range(n) if a[i] >> j & 1}


def _rel_from_mask(mask: int, n: int) -> Rel:
    row = (1 << n) - 1
    return tuple((mask >> (i * n)) & row for i in range(n))


# -- interpretations -----------------------------------------------------------


@dataclass(frozen=True)
class RelInterp:
    """Base ``{0..n-1}``, one relation per program, one subset per test."""

    n: int
    progs: Mapping[str, Rel] = field(default_factory=dict)
    tests: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        full = (1 << self.n) - 1
        for name, mask in self.tests.items():
            if mask & ~full:
                raise ValueError(f"test {name} mentions points outside the base")
        for name, rel in self.progs.items():
            if len(rel) != self.n or any(r & ~full for r in rel):
                raise ValueError(f"relation for {name} is not over the base")

    @classmethod
    def from_pairs(cls, n: int, progs=None, tests=None) -> "RelInterp":
        progs = {p: rel_from_pairs(n, pairs) for p, pairs in (progs or {}).items()}
        masks = {}
        for b, points in (tests or {}).items():
            m = 0
            for x in points:
                m |= 1 << x
            masks[b] = m
        return cls(n, progs, masks)

    def signature(self) -> Signature:
        return Signature(tuple(self.progs), tuple(self.tests))

    def to_json(self) -> dict:
        return {
            "base_size": self.n,
            "progs": {p: sorted([i, j] for i, j in rel_pairs(r)) for p, r in sorted(self.progs.items())},
            "tests": {
                b: [i for i in range(self.n) if m >> i & 1] for b, m in sorted(self.tests.items())
            },
        }

    @classmethod
    def from_json(cls, data: dict) -> "RelInterp":
        return cls.from_pairs(
            data["base_size"],
            {p: [tuple(x) for x in pairs] for p, pairs in data["progs"].items()},
            data["tests"],
        )


def evaluate(t: Term, m: RelInterp) -> Rel:
    """Relational value of ``t`` under ``m``."""
    n = m.n
    if isinstance(t, Zero):
        return rel_empty(n)
    if isinstance(t, One):
        return rel_id(n)
    if isinstance(t, Prog):
        try:
            return m.progs[t.name]
        except KeyError:
            raise UndeclaredSymbol(t.name) from None
    if isinstance(t, Test):
        try:
            return rel_diag(m.tests[t.name], n)
        except KeyError:
            raise UndeclaredSymbol(t.name) from None
    if isinstance(t, Not):
        return rel_complement_test(evaluate(t.arg, m))
    if isinstance(t, Plus):
        return rel_union(evaluate(t.left, m), evaluate(t.right, m))
    if isinstance(t, Dot):
        return rel_compose(evaluate(t.left, m), evaluate(t.right, m))
    if isinstance(t, Star):
        return rel_star(evaluate(t.arg, m))
    raise TypeError(f"not a term: {t!r}")


def holds(e: Equation, m: RelInterp) -> bool:
    lhs, rhs = evaluate(e.lhs, m), evaluate(e.rhs, m)
    return lhs == rhs if e.relation == "=" else rel_leq(lhs, rhs)


def satisfies(m: RelInterp, f: HornFormula) -> bool:
    """``m |= f``: the conclusion holds whenever every hypothesis does."""
    return not all(holds(h, m) for h in f.hypotheses) or holds(f.conclusion, m)


def chain_model(word: GuardedWord, signature: Signature) -> RelInterp:
    """The path model of a guarded word: points ``0..k``, program ``p``
    relating ``i-1`` to ``i`` where the i-th program is ``p``, and each test
    holding at the points whose atom contains it."""
    n = len(word.atoms)
    progs = {p: [] for p in signature.programs}
    for i, p in enumerate(word.programs):
        progs.setdefault(p, []).append((i, i + 1))
    names = set(signature.tests).union(*word.atoms)
    tests = {b: [i for i, a in enumerate(word.atoms) if b in a] for b in names}
    return RelInterp.from_pairs(n, progs, tests)


# -- counterexample search -------------------------------------------------------


def interpretation_count(sig: Signature, n: int) -> int:
    return 2 ** (n * n * len(sig.programs) + n * len(sig.tests))


def _interp_from_masks(sig: Signature, n: int, pmasks, tmasks) -> RelInterp:
    return RelInterp(
        n,
        {p: _rel_from_mask(mk, n) for p, mk in zip(sig.programs, pmasks)},
        dict(zip(sig.tests, tmasks)),
    )


def all_interpretations(sig: Signature, n: int) -> Iterator[RelInterp]:
    """Every interpretation over base size ``n``, in bitmask order."""
    pranges = [range(2 ** (n * n))] * len(sig.programs)
    tranges = [range(2 ** n)] * len(sig.tests)
    for masks in itertools.product(*pranges, *tranges):
        yield _interp_from_masks(sig, n, masks[: len(sig.programs)], masks[len(sig.programs):])


def random_interpretation(sig: Signature, n: int, rng: random.Random) -> RelInterp:
    return _interp_from_masks(
        sig,
        n,
        [rng.getrandbits(n * n) for _ in sig.programs],
        [rng.getrandbits(n) for _ in sig.tests],
    )


def interpretations(
    sig: Signature, max_base: int, budget: int, seed: int = 0, modes: Optional[dict] = None
) -> Iterator[RelInterp]:
    """Interpretations for base sizes ``1..max_base``: all of them for a size
    whose count fits in ``budget``, otherwise ``budget`` uniform samples.
    ``modes`` (if given) records which mode ran per size."""
    rng = random.Random(seed)
    for n in range(1, max_base + 1):
        if interpretation_count(sig, n) <= budget:
            if modes is not None:
                modes[n] = "exhaustive"
            yield from all_interpretations(sig, n)
        else:
            if modes is not None:
                modes[n] = "sampled"
            for _ in range(budget):
                yield random_interpretation(sig, n, rng)


@dataclass
class OracleResult:
    model: Optional[RelInterp]
    modes: dict = field(default_factory=dict)
    checked: int = 0

    @property
    def exhaustive(self) -> bool:
        return all(m == "exhaustive" for m in self.modes.values())


def oracle_search(f: HornFormula, max_base: int = 3, budget: int = 200_000, seed: int = 0) -> OracleResult:
    """Brute-force countermodel search; see :func:`find_counterexample`."""
    if max_base < 1:
        raise ValueError("max_base must be >= 1")
    result = OracleResult(None)
    for m in interpretations(f.signature, max_base, budget, seed, result.modes):
        result.checked += 1
        if not satisfies(m, f):
            result.model = m
            return result
    return result


def find_counterexample(
    f: HornFormula, max_base: int = 3, budget: int = 200_000, seed: int = 0
) -> Optional[RelInterp]:
    """First interpretation (smallest base, enumeration order) refuting
    ``f``, or ``None``.  ``None`` only means nothing was found within the
    bounds."""
    return oracle_search(f, max_base, budget, seed).model


# -- finite subalgebras ------------------------------------------------------------


@dataclass(frozen=True)
class FiniteKat:
    """A finite subalgebra of the full relation algebra on ``{0..n-1}``:
    ``elements`` closed under +, ., *, 0, 1 and ``tests`` a Boolean
    subalgebra of the sub-identities (complement is ``id - c``)."""

    n: int
    elements: frozenset
    tests: frozenset

    @property
    def zero(self) -> Rel:
        return rel_empty(self.n)

    @property
    def one(self) -> Rel:
        return rel_id(self.n)

    def __len__(self) -> int:
        return len(self.elements)

    def __contains__(self, x) -> bool:
        return x in self.elements

    def is_closed(self) -> bool:
        els = self.elements
        if self.zero not in els or self.one not in els or not self.tests <= els:
            return False
        for x in els:
            if rel_star(x) not in els:
                return False
            for y in els:
                if rel_union(x, y) not in els or rel_compose(x, y) not in els:
                    return False
        return all(rel_complement_test(c) in self.tests for c in self.tests)


def generated_subalgebra(m: RelInterp, cap: int = 4096) -> FiniteKat:
    """Closure of the symbol images under the KAT operations."""
    n = m.n
    tests = {rel_empty(n), rel_id(n)} | {rel_diag(mk, n) for mk in m.tests.values()}
    _close(tests, cap, [rel_union, rel_compose], [rel_complement_test])
    elements = set(tests) | set(m.progs.values())
    _close(elements, cap, [rel_union, rel_compose], [rel_star])
    return FiniteKat(n, frozenset(elements), frozenset(tests))


def _close(items: set, cap: int, binary, unary) -> None:
    frontier = list(items)
    while frontier:
        if len(items) > cap:
            raise CapExceeded(f"subalgebra has more than {cap} elements")
        new = []
        current = list(items)
        for x in frontier:
            for op in unary:
                y = op(x)
                if y not in items:
                    items.add(y)
                    new.append(y)
            for z in current:
                for op in binary:
                    for y in (op(x, z), op(z, x)):
                        if y not in items:
                            items.add(y)
                            new.append(y)
        frontier = new
    if len(items) > cap:
        raise CapExceeded(f"subalgebra has more than {cap} elements")


def check_ideal_subalgebra(k: FiniteKat, x: Rel) -> bool:
    """Whether ``{y in k | y <= x}`` is closed under the KAT operations."""
    down = [y for y in k.elements if rel_leq(y, x)]
    if not rel_leq(k.one, x):
        return False
    for y in down:
        if not rel_leq(rel_star(y), x):
            return False
        for z in down:
            if not rel_leq(rel_union(y, z), x) or not rel_leq(rel_compose(y, z), x):
                return False
    # every test lies below 1 <= x, so complements stay inside
    return True


# -- the quotient by x |-> x + bottom -----------------------------------------------


@dataclass
class Quotient:
    """``L = f[K']`` for ``f(x) = x + bot`` on ``K' = {x | x <= top}``, with
    ``top = I(u)`` and ``bot = I(u r u)``.

    Addition and star are inherited from ``K``; product is ``vw + bot``;
    zero is ``bot``, one is ``1 + bot``, and the test complement is
    ``f(c)~ = f(!c)``.
    """

    k: FiniteKat
    interp: RelInterp
    r: Term
    top: Rel
    bot: Rel
    sub: frozenset  # K'
    elements: frozenset  # L
    tests: frozenset  # f[tests of K']
    checks: dict = field(default_factory=dict)

    def f(self, x: Rel) -> Rel:
        return rel_union(x, self.bot)

    @property
    def zero(self) -> Rel:
        return self.bot

    @property
    def one(self) -> Rel:
        return self.f(rel_id(self.k.n))

    def plus(self, v: Rel, w: Rel) -> Rel:
        return rel_union(v, w)

    def dot(self, v: Rel, w: Rel) -> Rel:
        return self.f(rel_compose(v, w))

    def star(self, v: Rel) -> Rel:
        return rel_star(v)

    def leq(self, v: Rel, w: Rel) -> bool:
        return rel_leq(v, w)

    def tilde(self, v: Rel) -> Rel:
        for c in self.k.tests:
            if self.f(c) == v:
                return self.f(rel_complement_test(c))
        raise KeyError("not a test of the quotient")

    def J(self, t: Term) -> Rel:
        """Evaluate ``t`` in ``L`` under ``J = f . I`` using the operations of
        ``L``."""
        if isinstance(t, Zero):
            return self.zero
        if isinstance(t, One):
            return self.one
        if isinstance(t, (Prog, Test)):
            return self.f(evaluate(t, self.interp))
        if isinstance(t, Not):
            return self.tilde(self.J(t.arg))
        if isinstance(t, Plus):
            return self.plus(self.J(t.left), self.J(t.right))
        if isinstance(t, Dot):
            return self.dot(self.J(t.left), self.J(t.right))
        if isinstance(t, Star):
            return self.star(self.J(t.arg))
        raise TypeError(f"not a term: {t!r}")

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def quotient_construction(
    k: FiniteKat,
    interp: RelInterp,
    r: Term,
    hypotheses: Sequence[Equation] = (),
    s: Optional[Term] = None,
    t: Optional[Term] = None,
    strict: bool = True,
) -> Quotient:
    """Build and audit the quotient of ``k`` collapsing everything below
    ``I(u r u)``.

    ``checks`` records every audited property; with ``strict`` a failing
    check raises :class:`QuotientAuditError`.
    """
    sig = interp.signature()
    for name, rel in interp.progs.items():
        if rel not in k:
            raise ValueError(f"I({name}) is not an element of k")
    u = universal_expression(sig.programs)
    top = evaluate(u, interp)
    bot = evaluate(Dot(Dot(u, r), u), interp)
    sub = frozenset(x for x in k.elements if rel_leq(x, top))
    sub_tests = frozenset(c for c in k.tests if rel_leq(c, top))
    q = Quotient(
        k, interp, r, top, bot, sub,
        frozenset(rel_union(x, bot) for x in sub),
        frozenset(rel_union(c, bot) for c in sub_tests),
    )
    q.checks = _audit(q, sub_tests, hypotheses, s, t)
    if strict and not q.ok:
        failed = sorted(name for name, good in q.checks.items() if not good)
        raise QuotientAuditError(f"quotient checks failed: {failed}")
    return q


def _audit(q: Quotient, sub_tests, hypotheses, s, t) -> dict:
    k, f, L = q.k, q.f, q.elements
    top, bot = q.top, q.bot
    checks = {}
    checks["top is starred"] = rel_star(top) == top
    checks["K' is a subalgebra"] = check_ideal_subalgebra(k, top)
    checks["bot absorbs top"] = (
        rel_compose(top, bot) == bot and rel_compose(bot, top) == bot
        and rel_leq(rel_compose(bot, bot), bot)
    )

    well_defined = True
    for c in sub_tests:
        for d in sub_tests:
            if f(c) == f(d) and f(rel_complement_test(c)) != f(rel_complement_test(d)):
                well_defined = False
    checks["tilde well-defined"] = well_defined

    sub = list(q.sub)
    hom = f(rel_empty(k.n)) == q.zero and f(rel_id(k.n)) == q.one
    for x in sub:
        hom &= f(rel_star(x)) == q.star(f(x))
        for y in sub:
            hom &= f(rel_union(x, y)) == q.plus(f(x), f(y))
            hom &= f(rel_compose(x, y)) == q.dot(f(x), f(y))
    for c in sub_tests:
        hom &= f(rel_complement_test(c)) == q.tilde(f(c))
    checks["f is a homomorphism"] = bool(hom)

    checks["L closed"] = all(
        q.star(v) in L and all(q.plus(v, w) in L and q.dot(v, w) in L for w in L) for v in L
    ) and q.zero in L and q.one in L
    checks["L extremes"] = all(rel_leq(bot, v) and rel_leq(v, top) for v in L)
    checks.update(_kat_axioms(q))

    checks["L,J |= r=0"] = q.J(q.r) == q.zero
    checks["J = f . I on r"] = q.J(q.r) == f(evaluate(q.r, q.interp))
    k_sat = all(holds(h, q.interp) for h in hypotheses)
    if hypotheses:
        checks["L,J |= E"] = (not k_sat) or all(
            _holds_in_quotient(h, q) for h in hypotheses
        )
    if s is not None and t is not None:
        u = universal_expression(q.interp.signature().programs)
        uru = Dot(Dot(u, q.r), u)
        i_s = evaluate(Plus(s, uru), q.interp)
        i_t = evaluate(Plus(t, uru), q.interp)
        chain = i_s == f(evaluate(s, q.interp)) == q.J(s)
        chain &= i_t == f(evaluate(t, q.interp)) == q.J(t)
        chain &= (q.J(s) == q.J(t)) == (i_s == i_t)
        checks["chain I(s+uru) = J(s), I(t+uru) = J(t)"] = bool(chain)
    return checks


def _holds_in_quotient(e: Equation, q: Quotient) -> bool:
    lhs, rhs = q.J(e.lhs), q.J(e.rhs)
    return lhs == rhs if e.relation == "=" else rel_leq(lhs, rhs)


def _kat_axioms(q: Quotient) -> dict:
    L = list(q.elements)
    tests = list(q.tests)
    plus, dot, star, leq = q.plus, q.dot, q.star, q.leq
    zero, one = q.zero, q.one
    semiring = True
    for x in L:
        semiring &= plus(x, x) == x and plus(x, zero) == x
        semiring &= dot(zero, x) == zero and dot(x, zero) == zero
        semiring &= dot(one, x) == x and dot(x, one) == x
        for y in L:
            semiring &= plus(x, y) == plus(y, x)
            for z in L:
                semiring &= plus(x, plus(y, z)) == plus(plus(x, y), z)
                semiring &= dot(x, dot(y, z)) == dot(dot(x, y), z)
                semiring &= dot(x, plus(y, z)) == plus(dot(x, y), dot(x, z))
                semiring &= dot(plus(y, z), x) == plus(dot(y, x), dot(z, x))
    unfold = all(
        leq(plus(one, dot(x, star(x))), star(x)) and leq(plus(one, dot(star(x), x)), star(x))
        for x in L
    )
    left = right = True
    for p in L:
        for qq in L:
            for x in L:
                if leq(plus(p, dot(qq, x)), x):
                    left &= leq(dot(star(qq), p), x)
                if leq(plus(p, dot(x, qq)), x):
                    right &= leq(dot(p, star(qq)), x)
    boolean = True
    for c in tests:
        nc = q.tilde(c)
        boolean &= nc in q.tests
        boolean &= plus(c, nc) == one and dot(c, nc) == zero
        boolean &= leq(c, one)
        for d in tests:
            boolean &= plus(c, d) in q.tests and dot(c, d) in q.tests
            boolean &= dot(c, d) == dot(d, c)
            boolean &= dot(c, c) == c
    return {
        "semiring axioms": bool(semiring),
        "star unfolding": unfold,
        "left star induction": left,
        "right star induction": right,
        "Boolean tests": bool(boolean),
    }
