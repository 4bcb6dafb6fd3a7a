from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metriclab.groups import IDENTITY, parse_group_spec
from metriclab.hyperbolicity import (
    NO_LARGE_DELTA, WITNESS_FOUND, check_quasi_geodesic, check_quasi_geodesic_powers,
    default_threshold, estimate_delta, fellow_travel, gromov_product, witness_search,
)
from metriclab.metrics import GeneratingSet, build_metric, enumerate_ball
from metriclab.suite import Fixtures

from oracles import tree_distance

FX = Fixtures(11)
H3 = parse_group_spec("H3")


def test_gromov_product_examples():
    F2, Z2 = FX.F2, FX.Z2
    assert gromov_product(FX.std(F2), F2.parse_element("a b"), F2.parse_element("a b^-1")) == 1
    assert gromov_product(FX.std(Z2), Z2.parse_element("e1"), Z2.parse_element("e2")) == 0
    ball = enumerate_ball(FX.std(F2), 4)
    x, y, w = F2.parse_element("a^2"), F2.parse_element("a b"), F2.parse_element("a")
    assert gromov_product(ball, x, y, w) == 0


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from([1, -1, 2, -2]), max_size=6), st.lists(st.sampled_from([1, -1, 2, -2]), max_size=6))
def test_gromov_product_in_tree_is_common_prefix(u, v):
    F2 = FX.F2
    names = {1: "a", -1: "a^-1", 2: "b", -2: "b^-1"}
    x = F2.parse_element(" ".join(names[c] for c in u) or "1")
    y = F2.parse_element(" ".join(names[c] for c in v) or "1")
    lx = x[0][1][0] if x else ()
    ly = y[0][1][0] if y else ()
    common = 0
    while common < min(len(lx), len(ly)) and lx[common] == ly[common]:
        common += 1
    assert gromov_product(FX.std(F2), x, y) == common
    assert tree_distance(lx, ly) == len(lx) + len(ly) - 2 * common


def test_tree_is_zero_hyperbolic():
    est = estimate_delta(enumerate_ball(FX.std(FX.F2), 4))
    assert est.delta == 0
    assert est.mode.startswith("exhaustive")


@pytest.mark.parametrize("R", [4, 6])
def test_flat_plane_delta_grows(R):
    est = estimate_delta(enumerate_ball(FX.std(FX.Z2), R))
    assert est.delta >= Fraction(R, 4)
    assert est.witness is not None


def test_z2_radius_six_exhaustive_value():
    est = estimate_delta(enumerate_ball(FX.std(FX.Z2), 6))
    assert est.delta == 6 and est.witness == ("0:3,3", "0:3,-3", "0:-3,3", "0:-3,-3")


def test_sampled_estimates_are_monotone_in_sample_count():
    ball = enumerate_ball(FX.std(FX.Z2), 6)
    vals = [estimate_delta(ball, samples=s, seed=4).delta for s in (50, 200, 800, 3000)]
    assert vals == sorted(vals)
    assert vals[-1] <= 6


def test_fellow_travel_constants():
    assert fellow_travel(FX.f2_pair, samples=20, radius=6).C_fellow == 1
    assert fellow_travel(FX.z2_pair, samples=20, radius=6).C_fellow == 2


def test_relative_fellow_travel_is_tighter():
    plain = fellow_travel(FX.zz_diag, samples=20, radius=6).C_fellow
    rel = fellow_travel(FX.zz_diag, samples=20, radius=6, relative=True).C_fellow
    assert rel <= plain and rel == 1


def test_geodesic_powers_fit_exactly():
    ab = FX.F2.parse_element("a b")
    fit = check_quasi_geodesic_powers(FX.std(FX.F2), ab, 8, reparametrize=True)
    assert (fit.K, fit.L) == (1, 0)
    fit = check_quasi_geodesic_powers(FX.std(FX.F2), ab, 8)
    assert (fit.K, fit.L) == (2, 0)
    assert check_quasi_geodesic_powers(FX.f2_abc, ab, 8).fits


def test_quasi_geodesic_violations_listed():
    Z2 = FX.Z2
    pts = [IDENTITY, Z2.parse_element("e1"), Z2.parse_element("e1^5")]
    fit = check_quasi_geodesic(FX.std(Z2), pts, K=1, L=0)
    assert set(fit.violations) == {(0, 2), (1, 2)}
    assert not fit.fits and fit.exceeds(1, 0)


def test_heisenberg_center_is_not_quasi_geodesic():
    m = build_metric(H3, GeneratingSet.standard(H3))
    z = H3.parse_key("0:0,0,1")
    short = check_quasi_geodesic_powers(m, z, 8, K=2, L=4, reparametrize=True)
    long = check_quasi_geodesic_powers(m, z, 24, K=2, L=4, reparametrize=True)
    assert short.fits
    assert not long.fits and len(long.violations) == 136
    assert long.K > short.K


def test_witness_found_on_diagonal_pair():
    w = witness_search(FX.z2_pair, 8, N=8, delta_threshold=2)
    assert w.verdict == WITNESS_FOUND
    assert w.f == FX.Z2.parse_element("e1^4 e2^4")
    assert w.slope == 4 and w.residual == 0
    lines = w.to_csv().splitlines()
    assert lines[0] == "n,delta,d1,d2,d_rel" and len(lines) == 10
    assert "verdict: WITNESS_FOUND" in w.summary()


def test_no_large_delta_for_additive_pair():
    w = witness_search(FX.z2_additive, 8, N=8, delta_threshold=2)
    assert w.verdict == NO_LARGE_DELTA and w.max_delta == 1
    assert w.f is None


def test_threshold_above_window_maximum():
    w = witness_search(FX.z2_pair, 8, N=8, delta_threshold=100)
    assert w.verdict == NO_LARGE_DELTA and w.max_delta == 4


def test_default_threshold_formula():
    assert default_threshold(FX.z2_pair) == 48


def test_relative_excursions_are_reported_and_capped():
    rep = fellow_travel(FX.zz_diag, samples=20, radius=6, relative=True)
    assert rep.excluded == sum(s[3] for s in rep.segments)
    assert rep.longest_excursion >= 1
    capped = fellow_travel(FX.zz_diag, samples=20, radius=6, relative=True, max_excursion=0)
    assert capped.excluded == 0 and capped.segments == []
    assert capped.C_fellow >= rep.C_fellow


def test_powers_lie_on_the_lifted_relative_geodesic():
    from metriclab.hyperbolicity import _nearest_on_relative_geodesic

    G = FX.ZZ
    f = G.parse_element("e1 e2 t")
    rows = _nearest_on_relative_geodesic(FX.zz_diag, f, 3)
    assert [k for _, k, _ in rows] == [G.key(G.power(f, n)) for n in range(4)]
    assert all(m == 1 for _, _, m in rows)


def test_peripheral_witness_candidates_fail_the_relative_test():
    w = witness_search(FX.zz_diag, 6, N=6, delta_threshold=2)
    assert w.verdict == "INCONCLUSIVE"
    assert all(fits[2].K > 2 for fits in w.fits.values())


def test_sampled_delta_on_surd_valued_metric():
    from metriclab.metrics import concave

    ball = enumerate_ball(FX.std(FX.F2, concave(), "concave"), 6)
    est = estimate_delta(ball, samples=400, seed=0)
    assert est.delta >= 0
    assert estimate_delta(ball, samples=1, seed=0, points=[IDENTITY] * 4).delta == 0
