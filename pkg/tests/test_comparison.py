import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metriclab.comparison import (
    BOUNDED, GROWING, MetricPair, additivity_defect_batch, coarse_equality_verdict, coset_constancy, profile,
    relative_lipschitz, summary_text, symmetry_violations, triangle_check,
)
from metriclab.groups import IDENTITY
from metriclab.relhyp import CosetId
from metriclab.suite import Fixtures

FX = Fixtures(7)
WORD = st.lists(st.sampled_from(["a", "b", "a^-1", "b^-1"]), max_size=6)


def el(words):
    return FX.F2.parse_element(" ".join(words) or "1")


def test_window_enumerates_the_shorter_metric():
    p = FX.f2_pair
    assert p.enum.name == "abc" and p.stretch == 2
    assert p.window_radius(4) == 2
    assert len(p.window(4)) == 31


def test_delta_values_on_free_pair():
    p = FX.f2_pair
    assert p.delta(el(["a", "b"])) == 1
    assert p.delta(el(["a", "b", "a", "b"])) == 2
    assert p.delta(el(["a"])) == 0


def test_pairs_require_common_group():
    with pytest.raises(ValueError):
        MetricPair(FX.std(FX.F2), FX.std(FX.Z2))


@settings(max_examples=60, deadline=None)
@given(WORD, WORD, WORD)
def test_delta_triangle_inequality(wx, wy, wz):
    p = FX.f2_pair
    x, y, z = el(wx), el(wy), el(wz)
    assert abs(p.delta(x, y) - p.delta(x, z)) <= p.d1(y, z) + p.d2(y, z)


@settings(max_examples=60, deadline=None)
@given(WORD)
def test_delta_is_symmetric(w):
    p = FX.f2_pair
    g = el(w)
    assert p.delta(g) == p.delta(FX.F2.invert(g))
    assert p.delta(g, IDENTITY) == p.delta(IDENTITY, g)


def test_sampled_triangle_and_symmetry_clean():
    for pair in FX.shipped_pairs():
        assert triangle_check(pair, samples=300, seed=3, radius=4).count == 0
        assert symmetry_violations(pair, pair.sample(4, 50, random.Random(1))) == 0


def test_additivity_defects():
    assert additivity_defect_batch(FX.f2_additive, samples=20, radius=6).max_defect == 1
    assert additivity_defect_batch(FX.z2_pair, samples=20, radius=6).max_defect == 2


def test_additive_profile_is_flat():
    maxes, args = profile(FX.f2_additive, [2, 4, 6])
    assert maxes == [1, 1, 1]
    assert args == ["0:1"] * 3
    rep = coarse_equality_verdict(FX.z2_additive, [2, 4, 6, 8])
    assert rep.verdict == BOUNDED and rep.constant == 1


def test_diagonal_profile_grows_linearly():
    rep = coarse_equality_verdict(FX.z2_pair, [2, 4, 6, 8])
    assert rep.max_abs == [1, 2, 3, 4]
    assert rep.verdict == GROWING and rep.shape == "linear"
    assert rep.slope == pytest.approx(0.5)
    assert rep.to_csv().splitlines()[0] == "radius,max_abs_delta,argmax"


@pytest.mark.parametrize("radii", [[2, 4], [4, 2, 6], [2, 2, 4]])
def test_profile_radii_validation(radii):
    with pytest.raises(ValueError):
        coarse_equality_verdict(FX.z2_pair, radii)


def test_coset_constancy_separates_pairs():
    H = CosetId(0, ())
    assert coset_constancy(FX.zz_additive, H, 1, 4, samples=4).L_hat == 0
    assert coset_constancy(FX.zz_diag, H, 1, 4, samples=4).L_hat == 3


def test_relative_lipschitz_additive():
    rep = relative_lipschitz(FX.zz_additive, 200, 3, 4)
    assert rep.P_hat == 1
    assert len(rep.outliers) <= 10


def test_relative_lipschitz_needs_peripherals():
    with pytest.raises(ValueError):
        relative_lipschitz(FX.f2_pair, 10)


def test_summary_text_renders_fractions():
    assert summary_text({"b": Fraction(1, 2), "a": 3, "c": "x"}) == "a: 3/1\nb: 1/2\nc: x\n"
