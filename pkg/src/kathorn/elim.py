"""Hypothesis elimination for KAT Horn formulas.

Two eliminations are implemented.  A hypothesis ``r = 0`` is dropped by
padding both sides of the conclusion with ``u r u``, where ``u`` is the
universal expression; this stays sound with arbitrary other hypotheses
present.  A family of hypotheses ``c p = c`` (``c`` Boolean, ``p`` atomic)
is dropped by substituting ``!c p + c`` for ``p`` everywhere else.

``translate_tr`` turns a KAT Horn formula into a test-free one by promoting
each test and its negation to fresh programs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

from .decide import decide_equal
from .syntax import format_equation, format_formula
from .terms import (
    EQ,
    LEQ,
    ONE,
    ZERO,
    Dot,
    Equation,
    HornFormula,
    Not,
    Plus,
    Prog,
    Signature,
    Symbol,
    Term,
    Test,
    Zero,
    is_boolean,
    plus_all,
    push_negations,
    substitute,
    universal_expression,
)


class EliminationError(ValueError):
    pass


# -- classification -------------------------------------------------------------


@dataclass(frozen=True)
class ZeroForm:
    r: Term
    source: Optional[Equation] = None


@dataclass(frozen=True)
class CpCForm:
    c: Term
    p: Prog
    source: Optional[Equation] = None


@dataclass(frozen=True)
class Other:
    equation: Equation


HypClass = Union[ZeroForm, CpCForm, Other]


def classify(e: Equation) -> HypClass:
    """``r = 0``, ``0 = r`` and ``r <= 0`` are ZeroForm; ``c;p = c`` (either
    side first) with ``c`` Boolean and ``p`` a program is CpCForm."""
    if isinstance(e.rhs, Zero):
        return ZeroForm(e.lhs, e)
    if isinstance(e.lhs, Zero) and e.relation == EQ:
        return ZeroForm(e.rhs, e)
    if e.relation == EQ:
        for prod, c in ((e.lhs, e.rhs), (e.rhs, e.lhs)):
            if (
                isinstance(prod, Dot)
                and isinstance(prod.right, Prog)
                and prod.left == c
                and is_boolean(c)
            ):
                return CpCForm(c, prod.right, e)
    return Other(e)


def combine_zeros(rs: Sequence[Term]) -> Term:
    """``r1 + ... + rk`` (left-associated, in the given order)."""
    if not rs:
        raise EliminationError("no zero hypotheses to combine")
    return plus_all(rs)


def normalize_pbp(e: Equation, signature: Optional[Signature] = None) -> Optional[Equation]:
    """Rewrite ``x;c = x`` (``c`` Boolean) to the equivalent ``x;!c = 0``.

    The rewrite is justified by ``x = x;c + x;!c`` and ``x;c;!c = 0``, both
    checked with the decider; returns None when ``e`` does not have the
    shape.
    """
    if e.relation != EQ:
        return None
    for prod, x in ((e.lhs, e.rhs), (e.rhs, e.lhs)):
        if isinstance(prod, Dot) and prod.left == x and is_boolean(prod.right):
            c = prod.right
            split = decide_equal(x, Plus(Dot(x, c), Dot(x, Not(c))), signature)
            disjoint = decide_equal(Dot(Dot(x, c), Not(c)), ZERO, signature)
            if not (split.valid and disjoint.valid):
                raise EliminationError(f"decider rejected the rewrite of {e}")
            return Equation(Dot(x, Not(c)), ZERO, EQ)
    return None


# -- r = 0 -------------------------------------------------------------------------


def uru(r: Term, signature: Signature) -> Term:
    u = universal_expression(signature.programs)
    return Dot(Dot(u, r), u)


def eliminate_zero(f: HornFormula, index: Optional[int] = None) -> HornFormula:
    """``E & r = 0 -> s = t``  becomes  ``E -> s + uru = t + uru``.

    ``index`` selects the ZeroForm hypothesis; by default the first one.
    """
    if index is None:
        index = next(
            (i for i, h in enumerate(f.hypotheses) if isinstance(classify(h), ZeroForm)), None
        )
        if index is None:
            raise EliminationError("no hypothesis of the form r = 0")
    hc = classify(f.hypotheses[index])
    if not isinstance(hc, ZeroForm):
        raise EliminationError(f"hypothesis {f.hypotheses[index]} is not of the form r = 0")
    pad = uru(hc.r, f.signature)
    concl = f.conclusion.as_eq()
    rest = f.hypotheses[:index] + f.hypotheses[index + 1:]
    return HornFormula(rest, Equation(Plus(concl.lhs, pad), Plus(concl.rhs, pad)), f.signature)


# -- c p = c -----------------------------------------------------------------------


def merge_cpc(fs: Sequence[CpCForm]) -> list[CpCForm]:
    """Merge hypotheses sharing a program: ``c p = c`` and ``d p = d`` give
    ``(c + d) p = c + d``.  Programs keep their first-occurrence order."""
    merged: dict[Prog, Term] = {}
    for h in fs:
        merged[h.p] = Plus(merged[h.p], h.c) if h.p in merged else h.c
    return [CpCForm(c, p) for p, c in merged.items()]


@dataclass(frozen=True)
class SynHom:
    """A syntactic homomorphism given by its action on atomic symbols;
    unmapped symbols are fixed."""

    action: Mapping[Symbol, Term] = field(default_factory=dict)

    def __post_init__(self):
        for sym, img in self.action.items():
            if isinstance(sym, Test) and not is_boolean(img):
                raise EliminationError(f"test {sym.name} mapped to non-Boolean {img}")

    def __call__(self, t: Term) -> Term:
        return substitute(t, self.action)

    def image(self, sym: Symbol) -> Term:
        return self.action.get(sym, sym)

    def apply_equation(self, e: Equation) -> Equation:
        return e.map(self)


def build_H(fs: Sequence[CpCForm]) -> SynHom:
    """``p_i |-> !c_i p_i + c_i`` for each hypothesis; programs must be
    distinct."""
    action: dict[Symbol, Term] = {}
    for h in fs:
        if h.p in action:
            raise EliminationError(f"program {h.p.name} occurs in two hypotheses; merge first")
        action[h.p] = Plus(Dot(Not(h.c), h.p), h.c)
    return SynHom(action)


def build_EH(h: SynHom, signature: Signature, drop_tautologies: bool = True) -> list[Equation]:
    """``{x = H(x)}`` for every program and test ``x`` of the signature."""
    out = []
    for sym in signature.symbols():
        img = h.image(sym)
        if drop_tautologies and img == sym:
            continue
        out.append(Equation(sym, img))
    return out


def check_idempotent(h: SynHom, signature: Signature) -> bool:
    """``H(H(x)) = H(x)`` in KAT for every symbol; this suffices since both
    sides extend homomorphically."""
    sig = signature.union(Signature(tuple(p.name for p in h.action if isinstance(p, Prog))))
    for sym in sig.symbols():
        once = h.image(sym)
        if not decide_equal(once, h(once), sig).valid:
            return False
    return True


def eliminate_cpc(f: HornFormula, fs: Sequence[CpCForm]) -> HornFormula:
    """``E & F -> s = t``  becomes  ``H(E) -> H(s) = H(t)`` with ``H`` built
    from the merged family ``F``."""
    if not fs:
        return f
    h = build_H(merge_cpc(fs))
    if not check_idempotent(h, f.signature):
        raise EliminationError("internal error: substitution is not idempotent")
    consumed = [x.source for x in fs]
    rest = []
    for e in f.hypotheses:
        if e in consumed:
            consumed.remove(e)
        else:
            rest.append(h.apply_equation(e))
    if consumed:
        raise EliminationError(f"hypotheses not in formula: {[str(e) for e in consumed]}")
    return HornFormula(tuple(rest), h.apply_equation(f.conclusion), f.signature)


# -- tests to programs -----------------------------------------------------------


def tr_names(signature: Signature) -> dict[str, tuple[str, str]]:
    """Fresh program names ``(positive, negative)`` for each test."""
    taken = set(signature.programs) | set(signature.tests)
    names = {}
    for b in signature.tests:
        pos, neg = f"{b}_t", f"{b}_f"
        while pos in taken or neg in taken:
            pos, neg = pos + "_", neg + "_"
        taken |= {pos, neg}
        names[b] = (pos, neg)
    return names


def translate_tr(f: HornFormula) -> HornFormula:
    """Test-free formula valid over relational models iff ``f`` is: each
    test ``b`` and ``!b`` become fresh programs ``b_t`` and ``b_f``, with
    added hypotheses ``b_t + b_f = 1`` and ``b_t;b_f = 0``."""
    names = tr_names(f.signature)
    if not names:
        return f
    mapping: dict = {}
    for b, (pos, neg) in names.items():
        mapping[Test(b)] = Prog(pos)
        mapping[Not(Test(b))] = Prog(neg)

    def tilde(t: Term) -> Term:
        return _replace_literals(push_negations(t), mapping)

    hyps = [e.map(tilde) for e in f.hypotheses]
    for b, (pos, neg) in names.items():
        hyps.append(Equation(Plus(Prog(pos), Prog(neg)), ONE))
        hyps.append(Equation(Dot(Prog(pos), Prog(neg)), ZERO))
    progs = f.signature.programs + tuple(x for pair in names.values() for x in pair)
    return HornFormula(tuple(hyps), f.conclusion.map(tilde), Signature(progs))


def _replace_literals(t: Term, mapping: Mapping[Term, Term]) -> Term:
    hit = mapping.get(t)
    if hit is not None:
        return hit
    if isinstance(t, (Plus, Dot)):
        return type(t)(_replace_literals(t.left, mapping), _replace_literals(t.right, mapping))
    if hasattr(t, "arg"):
        return type(t)(_replace_literals(t.arg, mapping))
    return t


# -- pipeline ------------------------------------------------------------------------


@dataclass(frozen=True)
class Residual:
    formula: HornFormula


@dataclass(frozen=True)
class TraceStep:
    rule: str
    consumed: tuple[Equation, ...]
    formula: HornFormula
    note: str = ""

    def to_json(self) -> dict:
        d = {
            "rule": self.rule,
            "consumed": [format_equation(e) for e in self.consumed],
            "formula": format_formula(self.formula),
        }
        if self.note:
            d["note"] = self.note
        return d


@dataclass
class ElimTrace:
    steps: list[TraceStep] = field(default_factory=list)

    def to_json(self) -> list[dict]:
        return [s.to_json() for s in self.steps]

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    def __len__(self) -> int:
        return len(self.steps)


def _apply_rule(f: HornFormula, rule: str, consumed: Sequence[Equation]) -> HornFormula:
    missing = [str(e) for e in consumed if e not in f.hypotheses]
    if missing:
        raise EliminationError(f"{rule}: hypotheses not in formula: {missing}")
    if rule == "normalize-pbp":
        (old,) = consumed
        new = normalize_pbp(old, f.signature)
        hyps = list(f.hypotheses)
        hyps[hyps.index(old)] = new
        return HornFormula(tuple(hyps), f.conclusion, f.signature)
    if rule == "eliminate-cpc":
        return eliminate_cpc(f, [classify(e) for e in consumed])
    if rule == "combine-zeros":
        zs = [classify(e) for e in consumed]
        rest = [h for h in f.hypotheses if h not in consumed]
        combined = Equation(combine_zeros([z.r for z in zs]), ZERO)
        return HornFormula((combined, *rest), f.conclusion, f.signature)
    if rule == "eliminate-zero":
        (old,) = consumed
        return eliminate_zero(f, list(f.hypotheses).index(old))
    raise EliminationError(f"unknown rule {rule!r}")


def eliminate_all(
    f: HornFormula, normalize: bool = False
) -> tuple[Union[Equation, Residual], ElimTrace]:
    """Eliminate every ``c p = c`` family, then every ``r = 0``.

    Returns the bare conclusion when no hypotheses remain, otherwise a
    :class:`Residual` carrying the transformed formula.
    """
    trace = ElimTrace()

    def step(rule: str, consumed: Sequence[Equation], note: str = "") -> None:
        nonlocal f
        f = _apply_rule(f, rule, consumed)
        trace.steps.append(TraceStep(rule, tuple(consumed), f, note))

    if normalize:
        for e in list(f.hypotheses):
            if isinstance(classify(e), Other) and normalize_pbp(e, f.signature) is not None:
                step("normalize-pbp", [e])

    cpcs = [c for c in map(classify, f.hypotheses) if isinstance(c, CpCForm)]
    if cpcs:
        h = build_H(merge_cpc(cpcs))
        eh = build_EH(h, f.signature, drop_tautologies=False)
        dropped = [str(e) for e in eh if e.lhs == e.rhs]
        step("eliminate-cpc", [c.source for c in cpcs], f"H: {h_text(h)}; tautologies dropped from E_H: {dropped}")

    zeros = [c for c in map(classify, f.hypotheses) if isinstance(c, ZeroForm)]
    if len(zeros) > 1:
        step("combine-zeros", [z.source for z in zeros])
    if zeros:
        step("eliminate-zero", [f.hypotheses[0] if len(zeros) > 1 else zeros[0].source])

    if f.hypotheses:
        return Residual(f), trace
    return f.conclusion, trace


def h_text(h: SynHom) -> str:
    from .syntax import format_term

    return ", ".join(f"{s.name} -> {format_term(t)}" for s, t in h.action.items())


def replay(f: HornFormula, trace: ElimTrace) -> HornFormula:
    """Re-apply each recorded step to ``f``, checking every intermediate
    formula against the trace."""
    for s in trace.steps:
        f = _apply_rule(f, s.rule, s.consumed)
        if f != s.formula:
            raise EliminationError(f"replay of {s.rule} diverged")
    return f
