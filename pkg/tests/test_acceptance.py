"""Acceptance criteria 1-8.

Each criterion is a function returning ``(ok, detail)``; the pytest
wrappers print one PASS/FAIL line per criterion and then assert.  Run this
file directly to get just the eight lines.
"""

from __future__ import annotations

import math
import os
import random
import sys
import tempfile
import time

import pytest

from kathorn.cli import main as cli_main
from kathorn.decide import GuardedWord, decide_equal, decide_leq, max_word_length, words_of
from kathorn.elim import CpCForm, build_EH, build_H, eliminate_zero, translate_tr
from kathorn.proofsearch import formula_of, pad_with_uru, search, zero_hyp_never_applied
from kathorn.relmodels import (
    CapExceeded,
    all_interpretations,
    evaluate,
    generated_subalgebra,
    holds,
    interpretations,
    oracle_search,
    quotient_construction,
    random_interpretation,
    satisfies,
)
from kathorn.syntax import parse_term
from kathorn.terms import (
    ONE,
    ZERO,
    Dot,
    Equation,
    HornFormula,
    LEQ,
    Not,
    Plus,
    Prog,
    Signature,
    Test,
    substitute,
    universal_expression,
)

sys.path.insert(0, os.path.dirname(__file__))
from _gen import random_term  # noqa: E402

P2 = ("p", "q")
SIG21 = Signature(P2, ("b",))
INTRO = "program p\ntest b\nhyp p;b = p\nhyp b;p = b\nshow p;p = p\n"


def _quiet_cli(text: str, *args: str) -> tuple[int, str]:
    import contextlib
    import io

    with tempfile.NamedTemporaryFile("w", suffix=".horn", delete=False) as fh:
        fh.write(text)
    buf = io.StringIO()
    try:
        with contextlib.redirect_stdout(buf):
            code = cli_main([args[0], fh.name, *args[1:], "--json"])
    finally:
        os.unlink(fh.name)
    return code, buf.getvalue()


def _term(rng: random.Random, max_size: int, programs=P2, tests=("b",)):
    return random_term(rng, rng.randint(1, max_size), programs, tests)


# -- 1 ------------------------------------------------------------------------------


def criterion_1():
    import json

    t0 = time.perf_counter()
    code, out = _quiet_cli(INTRO, "check", "--normalize-pbp")
    t_intro = time.perf_counter() - t0
    intro_ok = code == 0 and json.loads(out)["verdict"] == "valid"

    t0 = time.perf_counter()
    code, out = _quiet_cli("show p;p = p\n", "check")
    t_bare = time.perf_counter() - t0
    report = json.loads(out)
    witness = GuardedWord.parse(report["witness"]) if report["witness"] else None
    bare_ok = code == 1 and report["verdict"] == "invalid" and witness is not None and len(witness) == 2

    ok = intro_ok and bare_ok and t_intro < 1 and t_bare < 1
    return ok, (
        f"intro valid={intro_ok} in {t_intro:.3f}s; p;p=p invalid with witness "
        f"{witness} (length {len(witness) if witness else '-'}) in {t_bare:.3f}s"
    )


# -- 2 ------------------------------------------------------------------------------


def criterion_2(n_triples: int = 200, seed: int = 2):
    rng = random.Random(seed)
    t0 = time.perf_counter()
    violations = 0
    refuting = 0
    checked = 0
    decided = 0
    for _ in range(n_triples):
        hyps = []
        if rng.random() < 0.6:
            hyps.append(Equation(_term(rng, 5), _term(rng, 5), rng.choice(["=", LEQ])))
        r, s, t = _term(rng, 5), _term(rng, 5), _term(rng, 5)
        f = HornFormula((*hyps, Equation(r, ZERO)), Equation(s, t), SIG21)
        g = eliminate_zero(f)
        for m in interpretations(SIG21, 3, budget=3000, seed=rng.randrange(2**32)):
            checked += 1
            e_holds = all(holds(h, m) for h in hyps)
            if not e_holds:
                continue
            r_zero = not any(evaluate(r, m))
            if r_zero and not holds(f.conclusion, m):
                # an oracle counterexample to E & r=0 -> s=t
                refuting += 1
                if holds(g.conclusion, m):
                    violations += 1
            if r_zero and not holds(g.conclusion, m) and holds(f.conclusion, m):
                violations += 1
        if not hyps:
            # class level, E empty: a valid padded equation leaves no countermodel
            if decide_equal(g.conclusion.lhs, g.conclusion.rhs, SIG21).valid:
                decided += 1
                if oracle_search(f, 2, 2000).model is not None:
                    violations += 1
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and elapsed < 300
    return ok, (
        f"{n_triples} triples, {checked} interpretations, {refuting} counterexamples "
        f"transferred, {decided} decider-valid padded goals, {violations} violations, {elapsed:.1f}s"
    )


# -- 3 ------------------------------------------------------------------------------


def _valid_at(f: HornFormula, n: int) -> bool:
    return all(satisfies(m, f) for m in all_interpretations(f.signature, n))


def criterion_3(n_instances: int = 50, seed: int = 3):
    rng = random.Random(seed)
    violations = 0
    outcomes = {True: 0, False: 0}
    for _ in range(n_instances):
        progs = [Prog("p"), Prog("q")]
        rng.shuffle(progs)
        fam = [CpCForm(_boolean(rng), progs[0])]
        if rng.random() < 0.4:
            fam.append(CpCForm(_boolean(rng), progs[1]))
        h = build_H(fam)
        eh = build_EH(h, SIG21)
        others = [Equation(_term(rng, 4), _term(rng, 4))] if rng.random() < 0.5 else []
        s, t = _term(rng, 5), _term(rng, 5)
        lhs = HornFormula((*others, *eh), Equation(s, t), SIG21)
        with_f = HornFormula((*others, *(Equation(Dot(x.c, x.p), x.c) for x in fam)), Equation(s, t), SIG21)
        rhs = HornFormula(tuple(e.map(h) for e in others), Equation(h(s), h(t)), SIG21)
        for n in (1, 2):
            a, b, c = _valid_at(lhs, n), _valid_at(rhs, n), _valid_at(with_f, n)
            outcomes[a] += 1
            if not (a == b == c):
                violations += 1
    ok = violations == 0
    return ok, (
        f"{n_instances} instances x bases 1,2: {outcomes[True]} valid, {outcomes[False]} invalid, "
        f"{violations} violations"
    )


def _boolean(rng: random.Random):
    b = Test("b")
    return rng.choice([b, b, Not(b), ONE, ZERO, Plus(b, Not(b)), Dot(b, Not(b))])


# -- 4 ------------------------------------------------------------------------------


def criterion_4(n_audits: int = 24, seed: int = 4):
    rng = random.Random(seed)
    audits = failures = collapsed = separated = skipped = 0
    attempts = 0
    while audits < n_audits and attempts < 500:
        attempts += 1
        n = rng.choice([2, 2, 3])
        m = random_interpretation(SIG21, n, rng)
        try:
            # the audit is cubic in the algebra size
            k = generated_subalgebra(m, cap=48)
        except CapExceeded:
            skipped += 1
            continue
        r = _term(rng, 3)
        s, t = _term(rng, 4), _term(rng, 4)
        hyps = [Equation(_term(rng, 3), _term(rng, 3))]
        q = quotient_construction(k, m, r, hyps, s, t, strict=False)
        audits += 1
        if not q.ok:
            failures += 1
        if any(q.bot):
            collapsed += 1
        if q.J(s) != q.J(t):
            separated += 1
    ok = audits >= n_audits and failures == 0
    return ok, (
        f"{audits} audits ({collapsed} with nonzero bottom, {separated} with J(s) != J(t)), "
        f"{failures} failures, {skipped} skipped as too large"
    )


# -- 5 ------------------------------------------------------------------------------

_SEMIRING = [
    ("x + (y + z)", "(x + y) + z"),
    ("x + y", "y + x"),
    ("x + 0", "x"),
    ("x + x", "x"),
    ("x;(y;z)", "(x;y);z"),
    ("1;x", "x"),
    ("x;1", "x"),
    ("x;(y + z)", "x;y + x;z"),
    ("(x + y);z", "x;z + y;z"),
    ("0;x", "0"),
    ("x;0", "0"),
]
_STAR = [
    ("1 + x;x*", "x*"),
    ("1 + x*;x", "x*"),
    ("x*;x*", "x*"),
    ("x**", "x*"),
    ("(1 + x)*", "x*"),
    ("x;x*", "x*;x"),
]


def criterion_5(seed: int = 5):
    rng = random.Random(seed)
    t0 = time.perf_counter()
    failures = []
    count = 0

    def check(s, t, leq=False):
        nonlocal count
        count += 1
        v = (decide_leq if leq else decide_equal)(s, t, SIG21)
        if not v.valid:
            failures.append(f"{s} vs {t}")

    for _ in range(20):
        s = _term(rng, 6)
        check(s, s)
    for lhs, rhs in _SEMIRING + _STAR:
        for _ in range(3):
            env = {Prog(v): _term(rng, 4) for v in "xyz"}
            check(substitute(parse_term(lhs), env), substitute(parse_term(rhs), env))
    for lhs, rhs in [("(p + q)*", "p*;(q;p*)*"), ("p;(q;p)*", "(p;q)*;p")]:
        s, t = parse_term(lhs), parse_term(rhs)
        check(s, t)
        if words_of(s, 8) != words_of(t, 8):
            failures.append(f"word oracle: {lhs} vs {rhs}")
    u = universal_expression(P2)
    for _ in range(100):
        check(_term(rng, 8), u, leq=True)
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 30
    return ok, f"{count} decider queries, {len(failures)} failures, {elapsed:.2f}s"


# -- 6 ------------------------------------------------------------------------------


def criterion_6(n_audits: int = 100, seed: int = 6):
    rng = random.Random(seed)
    violations = reach = with_sites = nodes = 0
    kinds = {"proved": 0, "refuted": 0, "unknown": 0}
    for _ in range(n_audits):
        hyps = [
            (_term(rng, 3, tests=()), _term(rng, 4, tests=()))
            for _ in range(rng.choice([0, 1, 1, 2]))
        ]
        r = _term(rng, 3, tests=())
        t = _term(rng, 4, tests=())
        sigma = tuple(rng.choice(P2) for _ in range(rng.randint(0, 4)))
        audit = zero_hyp_never_applied(
            hyps, r, sigma, pad_with_uru(t, r, P2), depth=5, tau_max=2, max_nodes=3000
        )
        violations += len(audit.violations)
        reach += audit.reachability_failures
        with_sites += audit.nodes_with_sites
        nodes += audit.nodes_checked
        kinds[audit.outcome.kind] += 1
    ok = violations == 0 and reach == 0
    return ok, (
        f"{n_audits} searches, {nodes} nodes, {with_sites} with r-sites (all leaves), "
        f"{violations} violations, outcomes {kinds}"
    )


# -- 7 ------------------------------------------------------------------------------


def _finite_term(rng: random.Random, max_size: int):
    while True:
        t = _term(rng, max_size, tests=())
        if max_word_length(t) != math.inf:
            return t


def criterion_7(n_formulas: int = 50, seed: int = 7):
    rng = random.Random(seed)
    violations = 0
    kinds = {"proved": 0, "refuted": 0, "unknown": 0}
    for _ in range(n_formulas):
        hyps = [(_term(rng, 3, tests=()), _finite_term(rng, 3))]
        sigma = tuple(rng.choice(P2) for _ in range(rng.randint(0, 3)))
        t = _term(rng, 4, tests=())
        out = search(hyps, sigma, t, depth=5, tau_max=3, max_nodes=3000)
        kinds[out.kind] += 1
        f = formula_of(hyps, sigma, t)
        f = HornFormula(f.hypotheses, f.conclusion, Signature(P2))
        if out.kind == "proved":
            res = oracle_search(f, 3, 2**18)
            if res.model is not None or not res.exhaustive:
                violations += 1
        elif out.kind == "refuted":
            if satisfies(out.model, f):
                violations += 1
    ok = violations == 0 and kinds["proved"] > 0 and kinds["refuted"] > 0
    return ok, (
        f"{n_formulas} formulas, outcomes {kinds}, proved ones checked exhaustively "
        f"up to base 3, {violations} violations"
    )


# -- 8 ------------------------------------------------------------------------------


def criterion_8(n_formulas: int = 50, seed: int = 8):
    rng = random.Random(seed)
    violations = 0
    valid = 0
    for i in range(n_formulas):
        progs = ("p",) if i % 3 else P2
        sig = Signature(progs, ("b",))
        hyps = tuple(
            Equation(_term(rng, 4, progs), _term(rng, 3, progs), rng.choice(["=", LEQ]))
            for _ in range(rng.randint(0, 2))
        )
        f = HornFormula(hyps, Equation(_term(rng, 4, progs), _term(rng, 4, progs)), sig)
        g = translate_tr(f)
        a = oracle_search(f, 2, 10**6)
        b = oracle_search(g, 2, 10**6)
        assert a.exhaustive and b.exhaustive
        valid += a.model is None
        if (a.model is None) != (b.model is None):
            violations += 1
    ok = violations == 0
    return ok, f"{n_formulas} formulas ({valid} valid up to base 2), {violations} violations"


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
}


def _line(n: int, ok: bool, detail: str) -> str:
    return f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n, capsys):
    ok, detail = CRITERIA[n]()
    with capsys.disabled():
        print("\n" + _line(n, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    results = [CRITERIA[n]() for n in sorted(CRITERIA)]
    for n, (ok, detail) in zip(sorted(CRITERIA), results):
        print(_line(n, ok, detail))
    sys.exit(0 if all(ok for ok, _ in results) else 1)
