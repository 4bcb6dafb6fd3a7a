"""The acceptance battery: ten fixed checks, each reported as PASS or FAIL.

Every criterion builds its own groups and metrics so the battery is the same
whatever experiment config launches it; the config only supplies the seed
from which each criterion draws a named random substream.
"""

from __future__ import annotations

import filecmp
import os
import tempfile
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from .comparison import (
    BOUNDED, GROWING, MetricPair, additivity_defect_batch, coarse_equality_verdict, profile,
    relative_lipschitz, symmetry_violations, triangle_check,
)
from .config import substream
from .groups import GroupSpec, parse_group_spec
from .hyperbolicity import NO_LARGE_DELTA, WITNESS_FOUND, estimate_delta, fellow_travel, witness_search
from .metrics import (
    GeneratingSet, Metric, additive, audit_ball, build_metric, check_coarse_geodesic, clear_engines, concave,
    enumerate_ball, load_ball, save_ball,
)
from .numbers import format_number
from .relhyp import (
    CosetId, RelativeWindow, coset_intersection_diameter, coset_of, coset_projection, cross_validate,
    lift_relative_geodesic, relative_geodesic,
)
from .spectrum import DIFFERENT, NON_HYPERBOLIC, SAME, burago_check, compare_spectra, translation_length

F = format_number


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.number:>2} {self.name}: {self.detail}"


class Fixtures:
    """Groups, metrics and pairs shared by the criteria (built lazily)."""

    def __init__(self, seed: int):
        self.seed = seed
        self._cache: dict = {}

    def rng(self, name):
        return substream(self.seed, name)

    def _get(self, key, make):
        if key not in self._cache:
            self._cache[key] = make()
        return self._cache[key]

    # groups
    @property
    def F2(self) -> GroupSpec:
        return self._get("F2", lambda: parse_group_spec("F(2)"))

    @property
    def Z2(self) -> GroupSpec:
        return self._get("Z2", lambda: parse_group_spec("Z^2"))

    @property
    def ZZ(self) -> GroupSpec:
        return self._get("Z2*Z", lambda: parse_group_spec("Z^2 * Z"))

    def std(self, grp: GroupSpec, derivation=None, name="std") -> Metric:
        key = ("std", grp.text, name)
        if derivation is None:
            return self._get(key, lambda: build_metric(grp, GeneratingSet.standard(grp), name=name))
        return self._get(key, lambda: build_metric(grp, GeneratingSet.standard(grp), derivation, name=name))

    def diagonal(self, grp: GroupSpec) -> Metric:
        d = grp.parse_element("e1 e2")
        return self._get(("diag", grp.text), lambda: build_metric(
            grp, GeneratingSet.standard(grp, [("d", d, 1)]), name="diag"))

    @property
    def f2_abc(self) -> Metric:
        return self._get("abc", lambda: build_metric(
            self.F2, GeneratingSet.from_words(self.F2, [("a", "a"), ("b", "b"), ("c", "a b")]), name="abc"))

    # pairs
    @property
    def f2_pair(self) -> MetricPair:
        return self._get("P_f2", lambda: MetricPair(self.std(self.F2), self.f2_abc, "f2-abc"))

    @property
    def f2_additive(self) -> MetricPair:
        return self._get("P_f2add", lambda: MetricPair(
            self.std(self.F2), self.std(self.F2, additive(1), "add1"), "f2-add1"))

    @property
    def f2_concave(self) -> MetricPair:
        return self._get("P_f2cc", lambda: MetricPair(
            self.std(self.F2), self.std(self.F2, concave(), "concave"), "f2-concave"))

    @property
    def z2_pair(self) -> MetricPair:
        return self._get("P_z2", lambda: MetricPair(self.std(self.Z2), self.diagonal(self.Z2), "z2-diag"))

    @property
    def z2_additive(self) -> MetricPair:
        return self._get("P_z2add", lambda: MetricPair(
            self.std(self.Z2), self.std(self.Z2, additive(1), "add1"), "z2-add1"))

    @property
    def zz_additive(self) -> MetricPair:
        return self._get("P_zzadd", lambda: MetricPair(
            self.std(self.ZZ), self.std(self.ZZ, additive(1), "add1"), "zz-add1"))

    @property
    def zz_diag(self) -> MetricPair:
        return self._get("P_zzdiag", lambda: MetricPair(self.std(self.ZZ), self.diagonal(self.ZZ), "zz-diag"))

    def shipped_pairs(self) -> list:
        return [self.f2_pair, self.f2_additive, self.f2_concave, self.z2_pair, self.z2_additive,
                self.zz_additive, self.zz_diag]


def _els(grp, words):
    return [grp.parse_element(w) for w in words]


# ---- criteria ------------------------------------------------------------------


def crit_abelian_bracket(fx: Fixtures):
    Z = parse_group_spec("Z")
    m = build_metric(Z, GeneratingSet.from_words(Z, [("two", "t^2"), ("three", "t^3")]), name="z23")
    elements = [Z.power(Z.parse_element("t"), k) for k in range(1, 11)]
    rep = burago_check(m, elements, n_max=60)
    tau = translation_length(m, elements[0], n_max=24).exact
    ok = rep.C_hat <= 2 and rep.growth_flags == 0 and tau == Fraction(1, 3) and rep.truncations == 0
    return ok, f"C_hat={F(rep.C_hat)} growth_flags={rep.growth_flags} |1|={F(tau)}"


def crit_spectrum_discrimination(fx: Fixtures):
    parts, ok = [], True
    F2, Z2 = fx.F2, fx.Z2
    f_els = _els(F2, ["a", "b", "a b", "a b^-1", "a^2 b", "a b a^-1 b^-1"])
    z_els = _els(Z2, ["e1", "e2", "e1 e2", "e1 e2^-1", "e1^2 e2"])
    c = compare_spectra(fx.f2_pair.m1, fx.f2_pair.m2, f_els)
    row = next((r for r in c.rows if r.element == c.witness), None)
    good = (c.verdict == DIFFERENT and c.witness == F2.parse_element("a b")
            and row.first.exact == 2 and row.second.exact == 1)
    ok &= good
    parts.append(f"f2-abc={c.verdict}({F2.key(c.witness) if c.witness else '-'})")
    c = compare_spectra(fx.z2_pair.m1, fx.z2_pair.m2, z_els)
    row = next((r for r in c.rows if r.element == c.witness), None)
    good = (c.verdict == DIFFERENT and c.witness == Z2.parse_element("e1 e2")
            and row.first.exact == 2 and row.second.exact == 1)
    ok &= good
    parts.append(f"z2-diag={c.verdict}({Z2.key(c.witness) if c.witness else '-'})")
    for pair, els in ((fx.f2_additive, f_els), (fx.z2_additive, z_els)):
        c = compare_spectra(pair.m1, pair.m2, els)
        exact = all(r.first.exact is not None and r.first.exact == r.second.exact for r in c.rows)
        ok &= c.verdict == SAME and exact
        parts.append(f"{pair.name}={c.verdict}")
    return ok, " ".join(parts)


def crit_witness(fx: Fixtures):
    parts, ok = [], True
    for pair, radius in ((fx.f2_pair, 12), (fx.z2_pair, 12)):
        w = witness_search(pair, radius, N=8, delta_threshold=2)
        good = (w.verdict == WITNESS_FOUND and w.slope > 0
                and w.residual < 0.1 * float(w.value_range))
        ok &= good
        parts.append(f"{pair.name}={w.verdict}(slope={F(w.slope) if w.slope is not None else '-'})")
    w = witness_search(fx.f2_additive, 8, N=8, delta_threshold=2)
    ok &= w.verdict == NO_LARGE_DELTA
    parts.append(f"{fx.f2_additive.name}={w.verdict}")
    return ok, " ".join(parts)


def crit_profiles(fx: Fixtures):
    maxes, _ = profile(fx.f2_additive, [2, 4, 6, 8])
    add_ok = all(m == 1 for m in maxes)
    rep = coarse_equality_verdict(fx.f2_additive, [2, 4, 6, 8])
    add_ok &= rep.verdict == BOUNDED
    grow = coarse_equality_verdict(fx.f2_pair, [4, 6, 8, 10, 12])
    inc = all(b > a for a, b in zip(grow.max_abs, grow.max_abs[1:]))
    grow_ok = inc and grow.slope >= 0.25 and grow.verdict == GROWING
    return add_ok and grow_ok, (
        f"additive={','.join(F(m) for m in maxes)} f2-abc={','.join(F(m) for m in grow.max_abs)}"
        f" slope={grow.slope:.4g}")


def crit_coarse_geodesic_necessity(fx: Fixtures):
    pair = fx.f2_concave
    els = _els(fx.F2, ["a", "b", "a b", "a b^-1", "a^2 b"])
    c = compare_spectra(pair.m1, pair.m2, els)
    cg = check_coarse_geodesic(pair.m2, 1, radius=32, samples=20, seed=fx.rng("coarse").randrange(2**31))
    prof = coarse_equality_verdict(pair, [2, 4, 6, 8, 10])
    ok = c.verdict == SAME and not cg.passed and prof.verdict == GROWING
    return ok, (f"spectrum={c.verdict} coarse_geodesic(C=1,R=32)={'pass' if cg.passed else 'fail'}"
                f"({len(cg.failures)}/{cg.checked} failing) profile={prof.verdict}")


def crit_delta_estimates(fx: Fixtures):
    d_tree = estimate_delta(enumerate_ball(fx.std(fx.F2), 5)).delta
    ok = d_tree == 0
    parts = [f"F2(5)={F(d_tree)}"]
    for R in (4, 8, 12):
        d = estimate_delta(enumerate_ball(fx.std(fx.Z2), R)).delta
        ok &= d >= Fraction(R, 4)
        parts.append(f"Z2({R})={F(d)}")
    return ok, " ".join(parts)


def crit_lemma_suite(fx: Fixtures):
    ok, parts = True, []
    total = 0
    for pair in fx.shipped_pairs():
        t = triangle_check(pair, samples=10_000, seed=fx.rng(f"triangle:{pair.name}").randrange(2**31), radius=6)
        total += t.count
    ok &= total == 0
    parts.append(f"triangle_violations={total}")
    for pair in (fx.f2_pair, fx.f2_additive):
        C = fellow_travel(pair, samples=40, seed=fx.rng(f"fellow:{pair.name}").randrange(2**31), radius=8).C_fellow
        d = additivity_defect_batch(pair, samples=50, seed=fx.rng(f"additivity:{pair.name}").randrange(2**31),
                                    radius=8).max_defect
        ok &= d <= 2 * C + 1
        parts.append(f"{pair.name}:defect={F(d)}<=2*{F(C)}+1")
    sym = 0
    for pair in fx.shipped_pairs():
        rng = fx.rng(f"symmetry:{pair.name}")
        sym += symmetry_violations(pair, pair.sample(6, 200, rng))
    ok &= sym == 0
    parts.append(f"symmetry_violations={sym}")
    return ok, " ".join(parts)


def crit_relative_geometry(fx: Fixtures):
    G = fx.ZZ
    m = fx.std(G)
    ok, parts = True, []
    bad = cross_validate(RelativeWindow(m, 6))
    ok &= not bad
    parts.append(f"bfs_vs_formula_mismatches={len(bad)}")
    t = G.parse_element("t")
    H = CosetId(0, ())
    pr = coset_projection(m, H, t)
    expect = set(_els(G, ["1", "e1", "e1^-1", "e2", "e2^-1"]))
    ok &= set(pr.points) == expect and pr.diameter == 2
    parts.append(f"proj_size={len(pr.points)} proj_diam={F(pr.diameter)}")
    tH = coset_of(G, t, 0)
    for D in (1, 2):
        diams = [coset_intersection_diameter(m, H, tH, D, r) for r in (6, 8, 10)]
        ok &= len(set(diams)) == 1
        parts.append(f"D{D}={','.join(F(x) for x in diams)}")
    rng = fx.rng("lifts")
    fits = set()
    for _ in range(50):
        g = G.random_element(rng, 6)
        _, fit = lift_relative_geodesic(m, relative_geodesic(m.gens, g))
        fits.add((fit.K, fit.L))
    ok &= len(fits) == 1
    parts.append("lift_fits=" + ";".join(f"({F(k)},{F(l)})" for k, l in sorted(fits)))
    add = relative_lipschitz(fx.zz_additive, 500, fx.rng("lip:add").randrange(2**31), 6).P_hat
    ok &= add <= 2
    diag = [relative_lipschitz(fx.zz_diag, 500, fx.rng(f"lip:diag:{r}").randrange(2**31), r).P_hat
            for r in (4, 6, 8)]
    ok &= all(b >= a for a, b in zip(diag, diag[1:])) and diag[-1] > diag[0]
    parts.append(f"P_add={F(add)} P_diag={','.join(F(x) for x in diag)}")
    return ok, " ".join(parts)


def crit_central_element(fx: Fixtures):
    H = parse_group_spec("H3")
    m = fx._get("H3", lambda: build_metric(H, GeneratingSet.standard(H), name="std"))
    ball = enumerate_ball(m, 12)
    z = H.parse_key("0:0,0,1")
    est = translation_length(m, z, n_max=24, ball=ball)
    verdict = est.classify()
    ok = verdict == NON_HYPERBOLIC and est.recent_slope <= Fraction(1, 24)
    return ok, (f"class={verdict} recent_slope={F(est.recent_slope)} n_used={est.n_max}"
                f" truncated={'yes' if est.truncated else 'no'}")


def crit_determinism(fx: Fixtures, config_path: str | None = None):
    from .harness import run

    ok, parts = True, []
    with tempfile.TemporaryDirectory() as tmp:
        cache = os.path.join(tmp, "cache")
        os.makedirs(cache)
        cfg = config_path or _default_config()
        outs = []
        for i in range(2):
            clear_engines()
            out = os.path.join(tmp, f"run{i}")
            for sub in ("ball", "compare", "witness"):
                code = run(sub, cfg, out, cache, quiet=True)
                ok &= code == 0
            outs.append(out)
        names = sorted(os.listdir(outs[0]))
        same, diff, err = filecmp.cmpfiles(outs[0], outs[1], names, shallow=False)
        ok &= not diff and not err and len(same) == len(names) and bool(names)
        parts.append(f"files={len(names)} identical={len(same)}")
        # cache soundness on a fresh engine
        clear_engines()
        F2 = parse_group_spec("F(2)")
        m = build_metric(F2, GeneratingSet.standard(F2), name="std")
        cdir = os.path.join(tmp, "c2")
        os.makedirs(cdir)
        save_ball(enumerate_ball(m, 7), cdir)
        clear_engines()
        m = build_metric(F2, GeneratingSet.standard(F2), name="std")
        ball = load_ball(m, cdir, 7)
        checked, mism = audit_ball(ball, 0.01, fx.rng("audit").randrange(2**31))
        ok &= ball is not None and mism == 0 and checked > 0
        parts.append(f"audit_checked={checked} mismatches={mism}")
    return bool(ok), " ".join(parts)


def _default_config() -> str:
    here = os.path.dirname(os.path.abspath(__file__))
    for cand in (os.path.join(here, "..", "..", "configs", "f2_pair.ini"),):
        if os.path.exists(cand):
            return cand
    raise FileNotFoundError("shipped F(2) pair config not found")


CRITERIA: list[tuple[int, str, Callable]] = [
    (1, "abelian deviation bracket", crit_abelian_bracket),
    (2, "spectrum discrimination", crit_spectrum_discrimination),
    (3, "witness search", crit_witness),
    (4, "coarse-equality profiles", crit_profiles),
    (5, "coarse geodesic necessity", crit_coarse_geodesic_necessity),
    (6, "delta estimation", crit_delta_estimates),
    (7, "lemma suite", crit_lemma_suite),
    (8, "relative geometry", crit_relative_geometry),
    (9, "central element", crit_central_element),
    (10, "determinism and cache", crit_determinism),
]


def run_suite(seed: int = 0, only=None, config_path: str | None = None, echo=None) -> list[CriterionResult]:
    fx = Fixtures(seed)
    out = []
    for num, name, fn in CRITERIA:
        if only is not None and num not in only:
            continue
        if num == 10:
            passed, detail = fn(fx, config_path)
        else:
            passed, detail = fn(fx)
        res = CriterionResult(num, name, bool(passed), detail)
        out.append(res)
        if echo is not None:
            echo(res.line())
    return out


def suite_csv(results) -> str:
    import csv
    import io

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["criterion", "name", "status", "detail"])
    for r in results:
        w.writerow([r.number, r.name, "PASS" if r.passed else "FAIL", r.detail])
    return buf.getvalue()
