"""Decision procedure for KAT equations.

Terms are compiled to epsilon-automata over programs and atoms (complete
truth assignments to the tests), determinized on the fly, and compared
with a Hopcroft-Karp style union-find bisimulation.  When two terms differ a
shortest separating guarded word is extracted by a breadth-first search of
the product.

Also holds the language helpers for test-free terms used by the proof
search: ``words_of``, ``is_empty_language``, ``max_word_length`` and the
program-only automaton ``ka_automaton``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Optional, Union

from .terms import (
    Dot,
    Not,
    One,
    Plus,
    Prog,
    Signature,
    Star,
    Term,
    Test,
    Zero,
    is_boolean,
)

DEFAULT_ATOM_CAP = 6
DEFAULT_STATE_CAP = 200_000

Atom = frozenset  # the set of tests that hold


class ResourceError(RuntimeError):
    """A configured size cap was exceeded; the question stays undecided."""


def atoms_of(tests: Iterable[str]) -> list[Atom]:
    """All atoms over ``tests`` in a fixed order (bitmask order on the
    sorted test names)."""
    names = sorted(set(tests))
    return [
        frozenset(n for n, bit in zip(names, bits) if bit)
        for bits in (tuple(reversed(bs)) for bs in product((False, True), repeat=len(names)))
    ]


def format_atom(atom: Atom) -> str:
    return "{" + ",".join(sorted(atom)) + "}"


@dataclass(frozen=True)
class GuardedWord:
    """``atoms[0] programs[0] atoms[1] ... programs[-1] atoms[-1]``."""

    atoms: tuple[Atom, ...]
    programs: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.atoms) != len(self.programs) + 1:
            raise ValueError("guarded word must alternate atoms and programs")

    def __len__(self) -> int:
        # counted in atoms: a word with n programs has length n + 1
        return len(self.atoms)

    def __str__(self) -> str:
        parts = [format_atom(self.atoms[0])]
        for p, a in zip(self.programs, self.atoms[1:]):
            parts += [p, format_atom(a)]
        return ";".join(parts)

    @classmethod
    def parse(cls, text: str) -> "GuardedWord":
        parts = [x.strip() for x in text.split(";")]
        atoms = []
        for a in parts[::2]:
            if not (a.startswith("{") and a.endswith("}")):
                raise ValueError(f"bad atom {a!r}")
            inner = a[1:-1].strip()
            atoms.append(frozenset(x.strip() for x in inner.split(",") if x.strip()))
        return cls(tuple(atoms), tuple(parts[1::2]))


@dataclass(frozen=True)
class Verdict:
    valid: bool
    witness: Optional[GuardedWord] = None


@dataclass
class Fa:
    """Epsilon-automaton whose edges carry a program name, an atom, or
    ``None`` for epsilon."""

    start: int = 0
    accepts: set[int] = field(default_factory=set)
    edges: list[list[tuple[Union[str, Atom, None], int]]] = field(default_factory=list)

    def new_state(self) -> int:
        self.edges.append([])
        return len(self.edges) - 1

    @property
    def states(self) -> range:
        return range(len(self.edges))

    def add(self, src: int, label, dst: int) -> None:
        self.edges[src].append((label, dst))


def _boolean_atoms(b: Term, atoms: list[Atom]) -> frozenset:
    if isinstance(b, Zero):
        return frozenset()
    if isinstance(b, One):
        return frozenset(atoms)
    if isinstance(b, Test):
        return frozenset(a for a in atoms if b.name in a)
    if isinstance(b, Not):
        return frozenset(atoms) - _boolean_atoms(b.arg, atoms)
    if isinstance(b, Plus):
        return _boolean_atoms(b.left, atoms) | _boolean_atoms(b.right, atoms)
    if isinstance(b, Dot):
        return _boolean_atoms(b.left, atoms) & _boolean_atoms(b.right, atoms)
    raise TypeError(f"not a Boolean term: {b}")


def compile_term(t: Term, atoms: list[Atom], ka: bool = False) -> Fa:
    """Thompson-style construction; Boolean subterms become one edge per
    satisfying atom, or (``ka``, no tests) an epsilon edge when true."""
    fa = Fa()

    def build(x: Term) -> tuple[int, int]:
        s, e = fa.new_state(), fa.new_state()
        if ka and is_boolean(x):
            if _boolean_atoms(x, [frozenset()]):
                fa.add(s, None, e)
        elif is_boolean(x):
            for a in sorted(_boolean_atoms(x, atoms), key=atoms.index):
                fa.add(s, a, e)
        elif isinstance(x, Prog):
            fa.add(s, x.name, e)
        elif isinstance(x, Plus):
            for part in (x.left, x.right):
                ps, pe = build(part)
                fa.add(s, None, ps)
                fa.add(pe, None, e)
        elif isinstance(x, Dot):
            ls, le = build(x.left)
            rs, re_ = build(x.right)
            fa.add(s, None, ls)
            fa.add(le, None, rs)
            fa.add(re_, None, e)
        elif isinstance(x, Star):
            is_, ie = build(x.arg)
            fa.add(s, None, e)
            fa.add(s, None, is_)
            fa.add(ie, None, is_)
            fa.add(ie, None, e)
        else:
            raise TypeError(f"not a term: {x!r}")
        return s, e

    fa.start, end = build(t)
    fa.accepts = {end}
    return fa


def ka_automaton(t: Term) -> Fa:
    """Program-only automaton for a test-free term (R(t) = L(automaton))."""
    if not _test_free(t):
        raise ValueError(f"term contains tests: {t}")
    return compile_term(t, [], ka=True)


class _Determinized:
    """On-the-fly subset construction for guarded automata.

    A macro-state is the frozenset of automaton states reached after the
    last program step, before the closure under the current atom.
    """

    def __init__(self, fa: Fa, atoms: list[Atom], programs: list[str]):
        self.fa = fa
        self.atoms = atoms
        self.programs = programs
        self._closure: dict = {}

    def initial(self) -> frozenset:
        return frozenset([self.fa.start])

    def closure(self, states: frozenset, atom: Atom) -> frozenset:
        key = (states, atom)
        hit = self._closure.get(key)
        if hit is not None:
            return hit
        seen = set(states)
        stack = list(states)
        while stack:
            q = stack.pop()
            for label, dst in self.fa.edges[q]:
                if (label is None or label == atom) and dst not in seen:
                    seen.add(dst)
                    stack.append(dst)
        result = frozenset(seen)
        self._closure[key] = result
        return result

    def accepting(self, states: frozenset, atom: Atom) -> bool:
        return not self.fa.accepts.isdisjoint(self.closure(states, atom))

    def step(self, states: frozenset, atom: Atom, prog: str) -> frozenset:
        return frozenset(
            dst
            for q in self.closure(states, atom)
            for label, dst in self.fa.edges[q]
            if label == prog
        )


def _atoms_for(signature: Optional[Signature], terms, atom_cap: int):
    sig = Signature.of(*terms)
    if signature is not None:
        sig = sig.union(signature)
    if len(sig.tests) > atom_cap:
        raise ResourceError(
            f"{len(sig.tests)} tests exceed the atom cap of {atom_cap} "
            f"({2 ** len(sig.tests)} atoms)"
        )
    return sig, atoms_of(sig.tests)


def _find(parent: dict, x):
    root = x
    while parent.get(root, root) != root:
        root = parent[root]
    while parent.get(x, x) != root:
        parent[x], x = root, parent[x]
    return root


def _bisimilar(d1: _Determinized, d2: _Determinized, state_cap: int) -> bool:
    parent: dict = {}
    todo = deque([(d1.initial(), d2.initial())])
    seen = 0
    while todo:
        x, y = todo.popleft()
        rx, ry = _find(parent, (1, x)), _find(parent, (2, y))
        if rx == ry:
            continue
        for atom in d1.atoms:
            if d1.accepting(x, atom) != d2.accepting(y, atom):
                return False
        parent[rx] = ry
        seen += 1
        if seen > state_cap:
            raise ResourceError(f"more than {state_cap} state pairs explored")
        for atom in d1.atoms:
            for p in d1.programs:
                todo.append((d1.step(x, atom, p), d2.step(y, atom, p)))
    return True


def _shortest_witness(d1: _Determinized, d2: _Determinized, state_cap: int) -> GuardedWord:
    start = (d1.initial(), d2.initial())
    back: dict = {start: None}
    todo = deque([start])
    while todo:
        pair = todo.popleft()
        x, y = pair
        for atom in d1.atoms:
            if d1.accepting(x, atom) != d2.accepting(y, atom):
                atoms, progs = [atom], []
                cur = pair
                while back[cur] is not None:
                    cur, a, p = back[cur]
                    atoms.append(a)
                    progs.append(p)
                return GuardedWord(tuple(reversed(atoms)), tuple(reversed(progs)))
        for atom in d1.atoms:
            for p in d1.programs:
                nxt = (d1.step(x, atom, p), d2.step(y, atom, p))
                if nxt not in back:
                    back[nxt] = (pair, atom, p)
                    todo.append(nxt)
        if len(back) > state_cap:
            raise ResourceError(f"more than {state_cap} state pairs explored")
    raise AssertionError("terms are equivalent; no witness exists")


def decide_equal(
    s: Term,
    t: Term,
    signature: Optional[Signature] = None,
    atom_cap: int = DEFAULT_ATOM_CAP,
    state_cap: int = DEFAULT_STATE_CAP,
) -> Verdict:
    """Decide ``KAT |= s = t``.  Invalid verdicts carry a shortest guarded
    word accepted by exactly one side."""
    sig, atoms = _atoms_for(signature, (s, t), atom_cap)
    programs = list(sig.programs)
    d1 = _Determinized(compile_term(s, atoms), atoms, programs)
    d2 = _Determinized(compile_term(t, atoms), atoms, programs)
    if _bisimilar(d1, d2, state_cap):
        return Verdict(True)
    return Verdict(False, _shortest_witness(d1, d2, state_cap))


def decide_leq(
    s: Term,
    t: Term,
    signature: Optional[Signature] = None,
    atom_cap: int = DEFAULT_ATOM_CAP,
    state_cap: int = DEFAULT_STATE_CAP,
) -> Verdict:
    """Decide ``KAT |= s <= t`` as ``s + t = t``."""
    return decide_equal(Plus(s, t), t, signature, atom_cap, state_cap)


def accepts(t: Term, word: GuardedWord, signature: Optional[Signature] = None) -> bool:
    """Membership of a guarded word in the language of ``t`` (via the
    automaton)."""
    tests = set(Signature.of(t).tests) | set().union(*word.atoms)
    if signature is not None:
        tests |= set(signature.tests)
    atoms = atoms_of(tests)
    words_atoms = [frozenset(a) for a in word.atoms]
    d = _Determinized(compile_term(t, atoms), atoms, sorted(set(word.programs)))
    cur = d.initial()
    for atom, p in zip(words_atoms, word.programs):
        cur = d.step(cur, atom, p)
    return d.accepting(cur, words_atoms[-1])


# -- test-free languages ------------------------------------------------------


def _test_free(t: Term) -> bool:
    if isinstance(t, (Test, Not)):
        return False
    if isinstance(t, Star):
        return _test_free(t.arg)
    if isinstance(t, (Plus, Dot)):
        return _test_free(t.left) and _test_free(t.right)
    return True


def words_of(t: Term, max_len: int) -> set[tuple[str, ...]]:
    """``R(t)`` restricted to strings of at most ``max_len`` programs.

    Strings are tuples of program names.
    """
    if not _test_free(t):
        raise ValueError(f"term contains tests: {t}")
    if max_len < 0:
        raise ValueError("max_len must be >= 0")
    return _words(t, max_len)


def _words(t: Term, n: int) -> set[tuple[str, ...]]:
    if isinstance(t, Zero):
        return set()
    if isinstance(t, One):
        return {()}
    if isinstance(t, Prog):
        return {(t.name,)} if n >= 1 else set()
    if isinstance(t, Plus):
        return _words(t.left, n) | _words(t.right, n)
    if isinstance(t, Dot):
        left = _words(t.left, n)
        if not left:
            return set()
        right = _words(t.right, n)
        return {x + y for x in left for y in right if len(x) + len(y) <= n}
    if isinstance(t, Star):
        inner = _words(t.arg, n) - {()}
        result = {()}
        frontier = {()}
        while frontier:
            frontier = {
                x + y for x in frontier for y in inner if len(x) + len(y) <= n
            } - result
            result |= frontier
        return result
    raise TypeError(f"not a term: {t!r}")


def is_empty_language(t: Term) -> bool:
    """``R(t) = {}`` for a test-free term, decided structurally."""
    if isinstance(t, Zero):
        return True
    if isinstance(t, (One, Prog, Star)):
        return False
    if isinstance(t, Plus):
        return is_empty_language(t.left) and is_empty_language(t.right)
    if isinstance(t, Dot):
        return is_empty_language(t.left) or is_empty_language(t.right)
    raise ValueError(f"term contains tests: {t}")


def max_word_length(t: Term) -> Optional[float]:
    """Length of the longest string in ``R(t)``: ``None`` when the language
    is empty, ``math.inf`` when it is unbounded."""
    if isinstance(t, Zero):
        return None
    if isinstance(t, One):
        return 0
    if isinstance(t, Prog):
        return 1
    if isinstance(t, Plus):
        a, b = max_word_length(t.left), max_word_length(t.right)
        if a is None:
            return b
        if b is None:
            return a
        return max(a, b)
    if isinstance(t, Dot):
        a, b = max_word_length(t.left), max_word_length(t.right)
        if a is None or b is None:
            return None
        return a + b
    if isinstance(t, Star):
        inner = max_word_length(t.arg)
        return 0 if inner in (None, 0) else math.inf
    raise ValueError(f"term contains tests: {t}")


# -- guarded-string semantics by enumeration ---------------------------------


def guarded_words(
    t: Term, max_len: int, signature: Optional[Signature] = None
) -> set[GuardedWord]:
    """The guarded words of ``t`` with at most ``max_len`` programs, computed
    directly from the language semantics (no automata).  Exponential; meant
    as a cross-check for small terms."""
    sig = Signature.of(t) if signature is None else signature.union(Signature.of(t))
    atoms = atoms_of(sig.tests)

    def go(x: Term) -> set[tuple]:
        if is_boolean(x):
            return {(a,) for a in _boolean_atoms(x, atoms)}
        if isinstance(x, Prog):
            return {(a, x.name, b) for a in atoms for b in atoms} if max_len >= 1 else set()
        if isinstance(x, Plus):
            return go(x.left) | go(x.right)
        if isinstance(x, Dot):
            return _fuse(go(x.left), go(x.right), max_len)
        if isinstance(x, Star):
            inner = go(x.arg)
            result = {(a,) for a in atoms}
            frontier = set(result)
            while frontier:
                frontier = _fuse(frontier, inner, max_len) - result
                result |= frontier
            return result
        raise TypeError(f"not a term: {x!r}")

    return {GuardedWord(w[::2], w[1::2]) for w in go(t)}


def _fuse(xs: set[tuple], ys: set[tuple], max_len: int) -> set[tuple]:
    out = set()
    for x in xs:
        for y in ys:
            if x[-1] == y[0] and (len(x) + len(y) - 2) // 2 <= max_len:
                out.add(x + y[1:])
    return out
