import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kathorn.decide import (
    GuardedWord,
    ResourceError,
    accepts,
    decide_equal,
    decide_leq,
    guarded_words,
    is_empty_language,
    max_word_length,
    words_of,
)
from kathorn.relmodels import chain_model, find_counterexample, holds
from kathorn.syntax import parse_term
from kathorn.terms import ONE, ZERO, Equation, HornFormula, Signature, Star, substitute, universal_expression, Prog

from _gen import terms


def T(text):
    return parse_term(text, tests=["b", "c"])


# eleven idempotent-semiring axioms, plus star and Boolean consequences
SEMIRING = [
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
STAR = [
    ("1 + x;x*", "x*"),
    ("1 + x*;x", "x*"),
    ("x*;x*", "x*"),
    ("x**", "x*"),
    ("(1 + x)*", "x*"),
    ("x;x*", "x*;x"),
    ("(x + y)*", "x*;(y;x*)*"),
    ("x;(y;x)*", "(x;y)*;x"),
    ("0*", "1"),
    ("1*", "1"),
]
BOOLEAN = [
    ("b;!b", "0"),
    ("b + !b", "1"),
    ("b;b", "b"),
    ("b;c", "c;b"),
    ("!(b + c)", "!b;!c"),
    ("b + b;c", "b"),
]


def instantiate(text, x, y, z):
    t = parse_term(text)
    return substitute(t, {Prog("x"): x, Prog("y"): y, Prog("z"): z})


def test_reflexivity_and_witness_example():
    assert decide_equal(T("p;(q + b)*"), T("p;(q + b)*")).valid
    v = decide_equal(T("p;p"), T("p"))
    assert not v.valid
    assert str(v.witness) == "{};p;{}"
    assert len(v.witness) == 2


@pytest.mark.parametrize("lhs, rhs", SEMIRING + STAR + BOOLEAN)
def test_axioms_with_variables(lhs, rhs):
    assert decide_equal(T(lhs), T(rhs)).valid


@settings(max_examples=40, deadline=None)
@given(terms(max_leaves=4), terms(max_leaves=4), terms(max_leaves=4), st.sampled_from(SEMIRING + STAR))
def test_axioms_randomly_instantiated(x, y, z, axiom):
    lhs, rhs = axiom
    assert decide_equal(instantiate(lhs, x, y, z), instantiate(rhs, x, y, z)).valid


@pytest.mark.parametrize(
    "s, t",
    [("(p + q)*", "p*;(q;p*)*"), ("p;(q;p)*", "(p;q)*;p")],
)
def test_denesting_and_sliding_against_word_oracle(s, t):
    s, t = T(s), T(t)
    assert decide_equal(s, t).valid
    assert words_of(s, 8) == words_of(t, 8)


@pytest.mark.parametrize(
    "s, t, expected",
    [
        ("1", "p", False),
        ("0", "p;q*", True),
        ("p", "p + q", True),
        ("p + q", "p", False),
        ("b;p", "p", True),
        ("p", "b;p", False),
        ("p;b", "p", True),
    ],
)
def test_decide_leq(s, t, expected):
    assert decide_leq(T(s), T(t)).valid is expected


@settings(max_examples=100, deadline=None)
@given(terms(max_leaves=8))
def test_everything_below_universal_expression(s):
    progs = Signature.of(s).programs or ("p",)
    assert decide_leq(s, universal_expression(progs)).valid


@settings(max_examples=150, deadline=None)
@given(terms(tests=(), max_leaves=6), terms(tests=(), max_leaves=6))
def test_agrees_with_word_enumeration(s, t):
    v = decide_equal(s, t)
    if v.valid:
        assert words_of(s, 6) == words_of(t, 6)
    else:
        w = v.witness.programs
        assert (w in words_of(s, len(w))) != (w in words_of(t, len(w)))


@settings(max_examples=100, deadline=None)
@given(terms(tests=("b",), max_leaves=5), terms(tests=("b",), max_leaves=5))
def test_agrees_with_guarded_word_enumeration(s, t):
    sig = Signature(("p", "q"), ("b",))
    v = decide_equal(s, t, sig)
    if v.valid:
        assert guarded_words(s, 3, sig) == guarded_words(t, 3, sig)
    else:
        n = len(v.witness.programs)
        in_s = v.witness in guarded_words(s, n, sig)
        in_t = v.witness in guarded_words(t, n, sig)
        assert in_s != in_t
        assert accepts(s, v.witness, sig) == in_s
        assert accepts(t, v.witness, sig) == in_t


@settings(max_examples=100, deadline=None)
@given(terms(max_leaves=6), terms(max_leaves=6))
def test_witness_replays_as_relational_counterexample(s, t):
    sig = Signature(("p", "q"), ("b",))
    v = decide_equal(s, t, sig)
    if not v.valid:
        assert not holds(Equation(s, t), chain_model(v.witness, sig))


@settings(max_examples=25, deadline=None)
@given(terms(max_leaves=4), terms(max_leaves=4))
def test_valid_means_no_small_counterexample(s, t):
    if decide_equal(s, t).valid:
        f = HornFormula((), Equation(s, t))
        assert find_counterexample(f, max_base=2, budget=5000) is None


def test_atom_cap():
    many = parse_term("a1 + a2 + a3 + a4", tests=["a1", "a2", "a3", "a4"])
    with pytest.raises(ResourceError):
        decide_equal(many, ONE, atom_cap=3)


def test_state_cap():
    with pytest.raises(ResourceError):
        s = T("(p + q)*;p;(p + q);(p + q);(p + q)")
        decide_equal(s, s, state_cap=3)


@pytest.mark.parametrize(
    "text, n, expected",
    [
        ("p;q + q", 2, {("p", "q"), ("q",)}),
        ("p*", 2, {(), ("p",), ("p", "p")}),
        ("0", 5, set()),
        ("(p + 1);q", 3, {("q",), ("p", "q")}),
    ],
)
def test_words_of(text, n, expected):
    assert words_of(T(text), n) == expected


def test_words_of_rejects_tests():
    with pytest.raises(ValueError):
        words_of(T("b;p"), 2)


@pytest.mark.parametrize(
    "text, empty, longest",
    [
        ("0", True, None),
        ("p;0", True, None),
        ("0*", False, 0),
        ("p + q;q", False, 2),
        ("p;q*", False, math.inf),
        ("p + 0;q*", False, 1),
    ],
)
def test_empty_and_longest(text, empty, longest):
    t = T(text)
    assert is_empty_language(t) is empty
    assert max_word_length(t) == longest


def test_guarded_word_text_round_trip():
    w = GuardedWord.parse("{b};p;{};q;{b, c}")
    assert w.programs == ("p", "q")
    assert len(w) == 3
    assert GuardedWord.parse(str(w)) == w
