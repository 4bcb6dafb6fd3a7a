"""Geometry of the relative Cayley graph of a free product with abelian peripherals.

The relative graph adds an edge between any two points of a peripheral left
coset ``aH``.  For a free product whose generators each lie in one factor, the
relative length of ``g`` has a closed form: every peripheral syllable costs one
jump and every other syllable costs its (unweighted) word length in the
generators of its factor.  A breadth-first search over a finite window gives
an independent value for cross-checking.
"""

from __future__ import annotations

import csv
import io
import math
import random
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .errors import OutOfBall
from .groups import IDENTITY, Element, GroupSpec
from .metrics import Ball, GeneratingSet, Metric, Path, enumerate_ball
from .numbers import Number, format_number


@dataclass(frozen=True)
class CosetId:
    """Left coset ``rep * H_factor``; ``rep`` has no trailing syllable in the factor."""

    factor: int
    rep: Element


def coset_of(group: GroupSpec, g: Element, factor: int) -> CosetId:
    if g and g[-1][0] == factor:
        return CosetId(factor, g[:-1])
    return CosetId(factor, g)


def _require_peripheral(group: GroupSpec, factor: int):
    if factor not in group.peripherals:
        raise ValueError(f"factor {factor} is not peripheral in {group}")


def _require_structure(group: GroupSpec):
    if not group.peripherals:
        raise ValueError(f"{group} has no peripheral subgroups")


def _check_single_syllable(gens: GeneratingSet):
    for lab, el in zip(gens.labels, gens.elements):
        if len(el) != 1:
            raise ValueError(f"generator {lab} is not contained in a single factor")


def factor_generators(gens: GeneratingSet, factor: int, unit: bool = False) -> GeneratingSet:
    """The declared generators lying in one factor (optionally with unit weights)."""
    out = []
    for lab, el, w in gens.declared:
        if len(el) == 1 and el[0][0] == factor:
            out.append((lab, el, 1 if unit else w))
    if not out:
        raise ValueError(f"no generator lies in factor {factor}")
    return GeneratingSet(gens.group, out)


# ---- relative distance -------------------------------------------------------


def relative_length(gens: GeneratingSet, g: Element) -> int:
    """Relative length of ``g`` by the syllable formula."""
    group = gens.group
    _require_structure(group)
    _check_single_syllable(gens)
    per = set(group.peripherals)
    total = 0
    for f, payload in g:
        if f in per:
            total += 1
        else:
            m = Metric(factor_generators(gens, f, unit=True))
            total += int(m.word_length(((f, payload),)))
    return total


def relative_distance(gens: GeneratingSet, x: Element, y: Element) -> int:
    grp = gens.group
    return relative_length(gens, grp.multiply(grp.invert(x), y))


class RelativeWindow:
    """Breadth-first relative distances from the identity inside a word ball.

    Neighbours of ``u`` are its generator translates in the window together
    with every window element of each peripheral coset through ``u``.
    """

    def __init__(self, metric: Metric, radius):
        group = metric.group
        _require_structure(group)
        self.metric = metric
        self.radius = Fraction(radius)
        self.ball = enumerate_ball(metric.base, radius)
        elems = self.ball.elements()
        members = set(elems)
        cosets: dict[CosetId, list] = {}
        for v in elems:
            for f in group.peripherals:
                cosets.setdefault(coset_of(group, v, f), []).append(v)
        dist = {IDENTITY: 0}
        queue = deque([IDENTITY])
        done_cosets = set()
        gens = metric.gens.elements
        mul = group.multiply
        while queue:
            u = queue.popleft()
            du = dist[u] + 1
            for s in gens:
                v = mul(u, s)
                if v in members and v not in dist:
                    dist[v] = du
                    queue.append(v)
            for f in group.peripherals:
                c = coset_of(group, u, f)
                if c in done_cosets:
                    continue
                done_cosets.add(c)
                for v in cosets.get(c, ()):
                    if v not in dist:
                        dist[v] = du
                        queue.append(v)
        self.dist = dist

    def __contains__(self, g):
        return g in self.dist

    def distance(self, g: Element) -> int:
        if g not in self.dist:
            raise OutOfBall(g, "radius", "outside the relative window")
        return self.dist[g]

    def elements(self):
        return self.ball.elements()


def cross_validate(window: RelativeWindow) -> list:
    """Window elements whose search distance differs from the syllable formula."""
    gens = window.metric.gens
    key = window.metric.group.key
    return [key(g) for g in window.elements() if window.distance(g) != relative_length(gens, g)]


# ---- relative geodesics and lifts -------------------------------------------


@dataclass
class RelStep:
    kind: str  # "S" for a generator step, "J" for a coset jump
    start: Element
    end: Element
    label: str = ""
    coset: CosetId | None = None


@dataclass
class RelPath:
    steps: list = field(default_factory=list)

    @property
    def length(self) -> int:
        return len(self.steps)

    @property
    def points(self) -> list:
        if not self.steps:
            return [IDENTITY]
        return [self.steps[0].start] + [s.end for s in self.steps]

    def cosets(self) -> list:
        return [s.coset for s in self.steps if s.kind == "J"]


def relative_geodesic(gens: GeneratingSet, g: Element, start: Element = IDENTITY) -> RelPath:
    """A relative geodesic from ``start`` to ``start * g`` following the normal form."""
    group = gens.group
    _require_structure(group)
    _check_single_syllable(gens)
    per = set(group.peripherals)
    mul = group.multiply
    path = RelPath()
    cur = start
    for f, payload in g:
        syl = ((f, payload),)
        if f in per:
            nxt = mul(cur, syl)
            path.steps.append(RelStep("J", cur, nxt, coset=coset_of(group, cur, f)))
            cur = nxt
        else:
            m = Metric(factor_generators(gens, f, unit=True))
            geo = m.geodesic(syl)
            for lab in geo.labels:
                nxt = mul(cur, gens[lab])
                path.steps.append(RelStep("S", cur, nxt, label=lab))
                cur = nxt
    return path


def lift_relative_geodesic(metric: Metric, relpath: RelPath, L_cap=Fraction(4)):
    """Replace each coset jump by a word geodesic; return the path and its fit."""
    from .hyperbolicity import check_quasi_geodesic

    group = metric.group
    mul, inv = group.multiply, group.invert
    pts = [relpath.points[0]]
    labels: list = []
    for st in relpath.steps:
        if st.kind == "S":
            pts.append(st.end)
            labels.append(st.label)
        else:
            geo = metric.geodesic(mul(inv(st.start), st.end), start=st.start)
            pts.extend(geo.points[1:])
            labels.extend(geo.labels)
    length = sum((metric.gens.weight(lab) for lab in labels), Fraction(0))
    path = Path(pts, labels, length)
    fit = check_quasi_geodesic(metric, pts, params=_arc_params(metric, labels), L_cap=L_cap)
    return path, fit


def _arc_params(metric: Metric, labels) -> list:
    t = [Fraction(0)]
    for lab in labels:
        t.append(t[-1] + metric.gens.weight(lab))
    return t


def revisits_coset(relpath: RelPath) -> bool:
    seen = set()
    for c in relpath.cosets():
        if c in seen:
            return True
        seen.add(c)
    return False


# ---- coset geometry ---------------------------------------------------------


def peripheral_ball(metric: Metric, factor: int, radius) -> list:
    """Elements ``h`` of the peripheral factor with ``|h| <= radius``.

    Generators are single syllables, so lengths of factor elements are computed
    inside the factor's own generating set.
    """
    _check_single_syllable(metric.gens)
    sub = Metric(factor_generators(metric.gens, factor), name=f"factor{factor}")
    return enumerate_ball(sub, radius).elements()


def _set_distance(metric: Metric, p: Element, pts: Sequence[Element]) -> Number:
    return min(metric.distance(p, q) for q in pts)


def distance_to_coset(metric: Metric, g: Element, coset: CosetId) -> Number:
    """``d(g, aH)``: strip the leading peripheral syllable of ``a^-1 g``."""
    group = metric.group
    _check_single_syllable(metric.gens)
    x = group.multiply(group.invert(coset.rep), g)
    if x and x[0][0] == coset.factor:
        x = x[1:]
    return metric.length(x)


def diameter(metric: Metric, pts: Sequence[Element]) -> Number:
    best = Fraction(0)
    for i, p in enumerate(pts):
        for q in pts[i + 1:]:
            d = metric.distance(p, q)
            if d > best:
                best = d
    return best


@dataclass
class Projection:
    points: list
    diameter: Number
    distance: Number


def coset_projection(metric: Metric, coset: CosetId, g: Element, radius=None, strict: bool = False) -> Projection:
    """Coarse nearest-point projection of ``g`` to the coset ``aH``.

    Points within ``d(g, aH) + 1`` of ``g`` are collected (``< `` when
    ``strict``).  Such points ``ah`` satisfy ``|h| <= 2 d(g, a) + 1``, so the
    search over that peripheral ball is complete; if ``radius`` is given and is
    smaller than that bound the window cannot certify the answer and OutOfBall
    is raised.
    """
    group = metric.group
    _require_peripheral(group, coset.factor)
    a = coset.rep
    bound = 2 * metric.distance(g, a) + 1
    if radius is not None and Fraction(radius) < bound:
        raise OutOfBall(g, "radius", f"projection needs a window of radius {format_number(bound)}")
    hs = peripheral_ball(metric, coset.factor, _floor_number(bound))
    mul = group.multiply
    cands = [(metric.distance(g, mul(a, h)), mul(a, h)) for h in hs]
    d0 = min(d for d, _ in cands)
    if strict:
        pts = [p for d, p in cands if d < d0 + 1]
    else:
        pts = [p for d, p in cands if d <= d0 + 1]
    return Projection(pts, diameter(metric, pts), d0)


def _floor_number(x) -> Fraction:
    """A rational at least ``x`` (surds are rounded up)."""
    if isinstance(x, (Fraction, int)):
        return Fraction(x)
    return Fraction(math.floor(float(x)) + 1)


def projection_passage_check(metric: Metric, coset: CosetId, g: Element, targets: Sequence[Element],
                             radius=None) -> Number:
    """Max over targets in the coset of the gap between a geodesic g -> target and π(g)."""
    group = metric.group
    proj = coset_projection(metric, coset, g, radius)
    worst = Fraction(0)
    geo_metric = metric.base
    for y in targets:
        path = geo_metric.geodesic(group.multiply(group.invert(g), y), start=g)
        miss = min(_set_distance(metric, p, proj.points) for p in path.points)
        if miss > worst:
            worst = miss
    return worst


def coset_neighbourhood(metric: Metric, coset: CosetId, D, radius) -> set:
    """Points of the D-neighbourhood of ``aH`` whose length is at most ``radius``."""
    group = metric.group
    mul = group.multiply
    a = coset.rep
    reach = Fraction(radius) + Fraction(D) + metric.length(a)
    hs = peripheral_ball(metric, coset.factor, reach)
    us = enumerate_ball(metric, D).elements()
    out = set()
    for h in hs:
        ah = mul(a, h)
        for u in us:
            p = mul(ah, u)
            if metric.length(p) <= radius:
                out.add(p)
    return out


def coset_intersection_diameter(metric: Metric, c1: CosetId, c2: CosetId, D, radius) -> Number:
    if c1 == c2:
        raise ValueError("cosets must be distinct")
    n1 = coset_neighbourhood(metric, c1, D, radius)
    n2 = coset_neighbourhood(metric, c2, D, radius)
    common = sorted(n1 & n2, key=metric.group.key)
    return diameter(metric, common) if common else Fraction(0)


def almost_convexity_check(metric: Metric, factor: int, pairs: Sequence[tuple] | None = None,
                           samples: int = 20, seed: int = 0, radius=6, max_geodesics: int = 64) -> Number:
    """Largest distance from the peripheral subgroup along word geodesics between its points.

    Sampled pairs come from the peripheral ball of radius ``radius / 2`` so that
    every geodesic stays inside the word ball of radius ``radius``.
    """
    group = metric.group
    _require_peripheral(group, factor)
    base = metric.base
    if pairs is None:
        rng = random.Random(seed)
        hs = peripheral_ball(base, factor, Fraction(radius) / 2)
        pairs = [(rng.choice(hs), rng.choice(hs)) for _ in range(samples)]
    H = CosetId(factor, IDENTITY)
    worst = Fraction(0)
    mul, inv = group.multiply, group.invert
    for x, y in pairs:
        g = mul(inv(x), y)
        L = base.word_length(g)
        geos = enumerate_ball(base, L).all_geodesics(g, max_geodesics) if g else []
        for geo in geos:
            for p in geo.points:
                d = distance_to_coset(base, mul(x, p), H)
                if d > worst:
                    worst = d
    return worst


def all_geodesics(metric: Metric, g: Element, limit: int = 64) -> list:
    """Word geodesics from 1 to ``g`` (exhaustive up to ``limit``)."""
    base = metric.base
    return enumerate_ball(base, base.word_length(g)).all_geodesics(g, limit)


# ---- reports -----------------------------------------------------------------


def table_csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        # counts stay plain integers; metric values are written exactly as p/q or surds
        w.writerow([format_number(x) if isinstance(x, Fraction) or hasattr(x, "sign") else x for x in r])
    return buf.getvalue()
