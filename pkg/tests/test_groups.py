import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metriclab.errors import ElementError, GroupSpecSyntaxError, UnsupportedNesting
from metriclab.groups import IDENTITY, cyclic_reduce, parse_group_spec

from oracles import free_reduce

SPECS = ["F(2)", "Z^2", "Z^2 * Z", "H3", "Z x F(2)", "F(2) * Z^3", "H3 * Z"]


def words(n_gens, max_len=12):
    return st.lists(st.tuples(st.integers(0, n_gens - 1), st.sampled_from([1, -1])), max_size=max_len)


def evaluate(grp, word):
    gens = [g for _, g in grp.standard_generators()]
    out = IDENTITY
    for i, s in word:
        g = gens[i]
        out = grp.multiply(out, g if s == 1 else grp.invert(g))
    return out


# ---- parsing -------------------------------------------------------------------


def test_parse_free_product_of_abelian_factors():
    G = parse_group_spec("Z^2 * Z^1")
    assert len(G.factors) == 2
    assert G.peripherals == (0,)
    assert G.is_toral_rel_hyp


def test_parse_free_group_has_no_peripherals():
    G = parse_group_spec("F(2)")
    assert G.peripherals == ()
    assert G.is_toral_rel_hyp


def test_heisenberg_is_not_toral():
    assert not parse_group_spec("H3").is_toral_rel_hyp


def test_rank_one_peripheral_switch():
    G = parse_group_spec("Z^2 * Z", rank_one_peripheral=True)
    assert G.peripherals == (0, 1)


def test_unicode_operators_accepted():
    assert parse_group_spec("Z^2 ∗ Z").canonical_text == parse_group_spec("Z^2 * Z").canonical_text
    assert parse_group_spec("Z × F(2)").canonical_text == parse_group_spec("Z x F(2)").canonical_text


@pytest.mark.parametrize("text", ["", "Z^0", "F(0)", "Q^2", "Z^2 *", "(Z^2", "Z^2 ) "])
def test_syntax_errors_carry_position(text):
    with pytest.raises(GroupSpecSyntaxError) as info:
        parse_group_spec(text)
    assert info.value.position >= 0


def test_free_product_inside_direct_product_rejected():
    with pytest.raises(UnsupportedNesting):
        parse_group_spec("(Z * Z) x Z")


# ---- group law -----------------------------------------------------------------


def test_free_cancellation():
    F = parse_group_spec("F(2)")
    a = F.parse_element("a")
    assert F.multiply(a, F.invert(a)) == IDENTITY


def test_heisenberg_law():
    H = parse_group_spec("H3")
    x = H.syllable(0, (1, 0, 0))
    y = H.syllable(0, (0, 1, 0))
    assert H.multiply(x, y) == H.syllable(0, (1, 1, 1))


def test_free_product_merges_across_cancelled_letter():
    G = parse_group_spec("Z^2 * Z")
    g = G.parse_element("e1 t t^-1 e2")
    assert g == G.syllable(0, (1, 1))


def test_heisenberg_inverse_closed_form():
    H = parse_group_spec("H3")
    for a, b, c in [(2, 3, 5), (-1, 4, 0), (3, -2, -7)]:
        assert H.invert(H.syllable(0, (a, b, c))) == H.syllable(0, (-a, -b, -c + a * b))


def test_free_inverse_of_word():
    F = parse_group_spec("F(2)")
    assert F.invert(F.parse_element("a b")) == F.parse_element("b^-1 a^-1")


def test_word_evaluation_examples():
    Z2 = parse_group_spec("Z^2")
    assert Z2.parse_element("e1 e2 e1") == Z2.syllable(0, (2, 1))
    F = parse_group_spec("F(2)")
    assert F.parse_element("a b b^-1") == F.parse_element("a")
    assert F.parse_element("1") == IDENTITY


def test_power_and_exponent_syntax():
    F = parse_group_spec("F(2)")
    assert F.parse_element("a^3 b^-2") == F.multiply(F.power(F.parse_element("a"), 3),
                                                     F.power(F.parse_element("b"), -2))


@pytest.mark.parametrize("spec", SPECS)
@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_group_axioms(spec, data):
    G = parse_group_spec(spec)
    n = len(G.standard_generators())
    x, y, z = (evaluate(G, data.draw(words(n))) for _ in range(3))
    m, inv = G.multiply, G.invert
    assert m(m(x, y), z) == m(x, m(y, z))
    assert m(x, inv(x)) == IDENTITY == m(inv(x), x)
    assert m(x, IDENTITY) == x == m(IDENTITY, x)
    G.validate(m(x, y))


@pytest.mark.parametrize("spec", SPECS)
@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_key_round_trip(spec, data):
    G = parse_group_spec(spec)
    g = evaluate(G, data.draw(words(len(G.standard_generators()))))
    assert G.parse_key(G.key(g)) == g


@settings(max_examples=100, deadline=None)
@given(words(2, 20))
def test_free_group_matches_string_reduction(word):
    F = parse_group_spec("F(2)")
    g = evaluate(F, word)
    letters = free_reduce([(i + 1) * s for i, s in word])
    assert g == (((0, (letters,)),) if letters else IDENTITY)


def test_invalid_elements_rejected():
    F = parse_group_spec("F(2)")
    with pytest.raises(ElementError):
        F.validate(((0, ((1, -1),)),))
    with pytest.raises(ElementError):
        F.parse_key("0:1,x")
    with pytest.raises(ElementError):
        F.parse_element("q")


# ---- cyclic reduction ----------------------------------------------------------


@pytest.mark.parametrize("word,core,conj", [
    ("a b a^-1", "b", "a"),
    ("a b", "a b", "1"),
    ("a^2 b a^-2", "b", "a^2"),
])
def test_cyclic_reduce_examples(word, core, conj):
    F = parse_group_spec("F(2)")
    c, k = cyclic_reduce(F, F.parse_element(word))
    assert c == F.parse_element(core)
    assert k == F.parse_element(conj)


@settings(max_examples=100, deadline=None)
@given(words(2, 16))
def test_cyclic_reduce_conjugates_back(word):
    F = parse_group_spec("F(2)")
    g = evaluate(F, word)
    core, k = cyclic_reduce(F, g)
    assert F.multiply(F.multiply(k, core), F.invert(k)) == g
    if core:
        letters = core[0][1][0]
        assert letters[0] != -letters[-1] or len(letters) == 1


def test_random_element_is_deterministic():
    G = parse_group_spec("Z^2 * Z")
    a = [G.random_element(random.Random(3), 8) for _ in range(3)]
    b = [G.random_element(random.Random(3), 8) for _ in range(3)]
    assert a == b
