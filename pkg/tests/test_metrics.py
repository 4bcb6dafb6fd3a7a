import os
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metriclab.errors import BudgetExceeded, CacheMismatch, NotGenerating, OutOfBall
from metriclab.groups import IDENTITY, parse_group_spec
from metriclab.metrics import (
    GeneratingSet, additive, audit_ball, build_metric, check_coarse_geodesic, clear_engines, concave,
    enumerate_ball, load_ball, save_ball,
)
from metriclab.numbers import sqrt

from oracles import heisenberg_bfs, l1, tree_distance, z_two_three, z_two_three_search

F2 = parse_group_spec("F(2)")
Z2 = parse_group_spec("Z^2")
Z1 = parse_group_spec("Z")
H3 = parse_group_spec("H3")


def std(grp, der=None, **kw):
    if der is None:
        return build_metric(grp, GeneratingSet.standard(grp), **kw)
    return build_metric(grp, GeneratingSet.standard(grp), der, **kw)


def z23():
    return build_metric(Z1, GeneratingSet.from_words(Z1, [("two", "t^2"), ("three", "t^3")]))


def zt(n):
    return Z1.syllable(0, (n,)) if n else IDENTITY


# ---- distances -----------------------------------------------------------------


def test_l1_distance_on_z2():
    assert std(Z2).distance(IDENTITY, Z2.syllable(0, (3, 4))) == 7


def test_additive_perturbation_values():
    m = std(F2, additive(1))
    assert m.length(F2.parse_element("a")) == 2
    assert m.length(IDENTITY) == 0


def test_concave_perturbation_values():
    m = std(F2, concave())
    assert m.length(F2.parse_element("a b a")) == 3 + sqrt(3)


def test_two_three_generators_against_search():
    m = z23()
    table = z_two_three_search(12)
    for n in range(-20, 21):
        assert m.length(zt(n)) == z_two_three(n)
        if n in table:
            assert table[n] == z_two_three(n)
    assert m.length(zt(1)) == 2
    assert m.length(zt(7)) == 3


def test_free_word_length():
    assert std(F2).word_length(F2.parse_element("a b a b")) == 4


def test_heisenberg_center_distances_match_bfs():
    oracle = heisenberg_bfs(12)
    m = std(H3)
    for n in range(0, 10):
        assert m.length(H3.syllable(0, (0, 0, n)) if n else IDENTITY) == oracle[(0, 0, n)]


def test_heisenberg_center_frozen_profile():
    # values from the breadth-first oracle, extended by exact targeted search
    frozen = [0, 4, 6, 8, 8, 10, 10, 12, 12, 12, 14, 14, 14, 16, 16, 16]
    m = std(H3)
    got = [m.length(H3.syllable(0, (0, 0, n)) if n else IDENTITY) for n in range(len(frozen))]
    assert got == frozen


def test_weighted_generators():
    gens = GeneratingSet.standard(Z2, [("d", Z2.parse_element("e1 e2"), Fraction(3, 2))])
    m = build_metric(Z2, gens)
    assert m.length(Z2.syllable(0, (1, 1))) == Fraction(3, 2)
    assert m.length(Z2.syllable(0, (2, 1))) == Fraction(5, 2)


def test_non_generating_set_rejected():
    with pytest.raises(NotGenerating):
        build_metric(F2, GeneratingSet.from_words(F2, [("a", "a")]))


# ---- balls ---------------------------------------------------------------------


@pytest.mark.parametrize("r", [0, 1, 2, 3, 4])
def test_free_ball_sizes(r):
    assert len(enumerate_ball(std(F2), r)) == 2 * 3 ** r - 1


@pytest.mark.parametrize("r", [0, 1, 2, 5])
def test_z2_ball_sizes(r):
    assert len(enumerate_ball(std(Z2), r)) == 2 * r * r + 2 * r + 1


def test_diagonal_ball_radius_one():
    gens = GeneratingSet.standard(Z2, [("d", Z2.parse_element("e1 e2"), 1)])
    assert len(enumerate_ball(build_metric(Z2, gens), 1)) == 7


def test_ball_distances_match_tree_oracle():
    ball = enumerate_ball(std(F2), 5)
    for g in ball.elements():
        letters = g[0][1][0] if g else ()
        assert ball.distance(g) == tree_distance((), letters)
        assert ball.distance(g) <= 5


def test_ball_predecessors_descend_by_one_weight():
    gens = GeneratingSet.from_words(Z2, [("a", "e1", 1), ("b", "e2", 2), ("d", "e1 e2", Fraction(3, 2))])
    m = build_metric(Z2, gens)
    ball = enumerate_ball(m, 6)
    for g in ball.elements():
        path = ball.geodesic(g)
        assert path.points[0] == IDENTITY and path.points[-1] == g
        assert path.length == ball.distance(g)
        for p, q, lab in zip(path.points, path.points[1:], path.labels):
            assert ball.distance(q) - ball.distance(p) == m.gens.weight(lab)


def test_geodesic_examples():
    p = std(Z2).geodesic(Z2.syllable(0, (3, 0)))
    assert p.labels == ["e1", "e1", "e1"]
    gens = GeneratingSet.standard(Z2, [("d", Z2.parse_element("e1 e2"), 1)])
    q = build_metric(Z2, gens).geodesic(Z2.syllable(0, (1, 1)))
    assert q.labels == ["d"] and q.length == 1
    assert std(Z2).geodesic(IDENTITY).labels == []


def test_out_of_ball_lookup():
    ball = enumerate_ball(std(F2), 2)
    with pytest.raises(OutOfBall):
        ball.distance(F2.parse_element("a^3"))


def test_budget_exceeded_reports_completed_radius():
    clear_engines()
    m = std(F2, budget=100)
    with pytest.raises(BudgetExceeded) as info:
        enumerate_ball(m, 10)
    assert info.value.completed_radius == 3
    clear_engines()


def abc_metric():
    return build_metric(F2, GeneratingSet.from_words(F2, [("a", "a"), ("b", "b"), ("c", "a b")]))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from(["a", "b", "a^-1", "b^-1"]), max_size=8))
def test_targeted_search_agrees_with_ball(word):
    m = abc_metric()
    ball = enumerate_ball(m, 6)
    g = F2.parse_element(" ".join(word) or "1")
    if g in ball:
        assert m.word_length(g) == ball.word_distance(g)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.integers(-4, 4), st.integers(-4, 4)), min_size=3, max_size=3))
def test_metric_axioms_on_z2_diagonal(pts):
    gens = GeneratingSet.standard(Z2, [("d", Z2.parse_element("e1 e2"), 1)])
    m = build_metric(Z2, gens)
    x, y, z = (Z2.syllable(0, p) if any(p) else IDENTITY for p in pts)
    assert m.distance(x, y) == m.distance(y, x)
    assert m.distance(x, z) <= m.distance(x, y) + m.distance(y, z)
    assert (m.distance(x, y) == 0) == (x == y)
    assert m.distance(x, y) <= l1((pts[0][0] - pts[1][0], pts[0][1] - pts[1][1]))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from(["a", "b", "a^-1", "b^-1"]), max_size=6),
       st.lists(st.sampled_from(["a", "b", "a^-1", "b^-1"]), max_size=6))
def test_left_invariance(w1, w2):
    m = abc_metric()
    x = F2.parse_element(" ".join(w1) or "1")
    y = F2.parse_element(" ".join(w2) or "1")
    s = F2.parse_element("a b^-1 a")
    assert m.distance(F2.multiply(s, x), F2.multiply(s, y)) == m.distance(x, y)


# ---- coarse geodesics ----------------------------------------------------------


def test_word_metric_is_geodesic():
    rep = check_coarse_geodesic(std(F2), 0, radius=8, samples=12)
    assert rep.passed and rep.checked == 12


def test_additive_perturbation_is_coarsely_geodesic():
    assert check_coarse_geodesic(std(F2, additive(1)), 1, radius=10, samples=12).passed


def test_concave_perturbation_fails_at_scale():
    rep = check_coarse_geodesic(std(F2, concave()), 1, radius=32, samples=20, seed=1)
    assert not rep.passed


def test_coarse_geodesic_radius_precondition():
    with pytest.raises(ValueError):
        check_coarse_geodesic(std(F2), 3, radius=4)


# ---- cache ---------------------------------------------------------------------


def test_cache_round_trip_and_audit(tmp_path):
    clear_engines()
    m = std(F2)
    ball = enumerate_ball(m, 5)
    path = save_ball(ball, str(tmp_path))
    before = open(path, "rb").read()
    keys = ball.keys()
    clear_engines()
    m2 = std(F2)
    loaded = load_ball(m2, str(tmp_path), 5)
    assert loaded.keys() == keys
    checked, bad = audit_ball(loaded, 0.01, seed=2)
    assert checked >= 1 and bad == 0
    save_ball(loaded, str(tmp_path))
    assert open(path, "rb").read() == before
    clear_engines()


def test_cache_header_mismatch(tmp_path):
    clear_engines()
    path = save_ball(enumerate_ball(std(F2), 3), str(tmp_path))
    text = open(path).read().replace("group=", "group=X", 1)
    open(path, "w").write(text)
    clear_engines()
    with pytest.raises(CacheMismatch):
        load_ball(std(F2), str(tmp_path), 3)
    clear_engines()


def test_missing_cache_returns_none(tmp_path):
    assert load_ball(std(Z2), str(tmp_path), 3) is None
    assert os.listdir(tmp_path) == []


def test_cache_single_edited_distance_detected(tmp_path):
    clear_engines()
    path = save_ball(enumerate_ball(std(Z2), 3), str(tmp_path))
    rows = open(path).read().splitlines(keepends=True)
    key, frac, lab = rows[6].rstrip("\n").split("\t")
    rows[6] = f"{key}\t{int(frac.split('/')[0]) - 1}/1\t{lab}\n"
    open(path, "w").write("".join(rows))
    clear_engines()
    with pytest.raises(CacheMismatch):
        load_ball(std(Z2), str(tmp_path), 3)
    clear_engines()
