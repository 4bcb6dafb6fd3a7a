"""The difference Δ = d1 - d2 of two invariant metrics and the checks built on it."""

from __future__ import annotations

import csv
import io
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .errors import OutOfBall
from .groups import IDENTITY, Element
from .metrics import Metric, Path, enumerate_ball
from .numbers import Number, format_number, is_rational

BOUNDED = "BOUNDED"
GROWING = "GROWING"
INCONCLUSIVE = "INCONCLUSIVE"


class MetricPair:
    """Two metrics on one group, compared on a common finite window.

    The window at radius ``r`` is a ball of one metric's base word length,
    shrunk so that it lies inside the other base ball of radius ``r``: with
    ``L = max_s |s|_other / w(s)`` over the enumerated generators, the window
    is ``{g : |g|_enum <= r / L}``.  The metric needing the smaller radius is
    the one enumerated.
    """

    def __init__(self, m1: Metric, m2: Metric, name: str = ""):
        if m1.group != m2.group:
            raise ValueError("metrics live on different groups")
        self.m1, self.m2 = m1, m2
        self.group = m1.group
        self.name = name or f"{m1.name}~{m2.name}"
        b1, b2 = m1.base, m2.base
        L2 = max(b1.word_length(s) / w for s, w in zip(b2.gens.elements, b2.gens.weights))
        L1 = max(b2.word_length(s) / w for s, w in zip(b1.gens.elements, b1.gens.weights))
        if L2 > L1:
            self.enum, self.stretch = b2, L2
        else:
            self.enum, self.stretch = b1, L1

    def window_radius(self, r) -> Fraction:
        sc = self.enum.gens.scale
        return Fraction(math.floor(Fraction(r) / self.stretch * sc), sc)

    def window(self, r) -> list:
        return enumerate_ball(self.enum, self.window_radius(r)).elements()

    def d1(self, x: Element, y: Element | None = None) -> Number:
        return self.m1.length(x) if y is None else self.m1.distance(x, y)

    def d2(self, x: Element, y: Element | None = None) -> Number:
        return self.m2.length(x) if y is None else self.m2.distance(x, y)

    def delta(self, x: Element, y: Element | None = None) -> Number:
        """Δ(1, x), or Δ(x, y) when two points are given."""
        if y is not None:
            x = self.group.multiply(self.group.invert(x), y)
        return self.m1.length(x) - self.m2.length(x)

    def sample(self, r, k: int, rng: random.Random) -> list:
        """``k`` window elements, stratified by shells of the enumerated metric."""
        ball = enumerate_ball(self.enum, self.window_radius(r))
        shells: dict = {}
        for g in ball.elements():
            shells.setdefault(ball.word_distance(g), []).append(g)
        keys = sorted(shells)
        return [rng.choice(shells[rng.choice(keys)]) for _ in range(k)]


def delta(pair: MetricPair, g: Element) -> Number:
    return pair.delta(g)


def symmetry_violations(pair: MetricPair, elements: Sequence[Element]) -> int:
    inv = pair.group.invert
    return sum(1 for g in elements if pair.delta(g) != pair.delta(inv(g)))


# ---- elementary inequalities --------------------------------------------------


@dataclass
class TriangleReport:
    checked: int
    violations: list = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.violations)


def triangle_check(pair: MetricPair, samples: int = 10_000, seed: int = 0, radius=6) -> TriangleReport:
    """|Δ(x,y) - Δ(x,z)| <= d1(y,z) + d2(y,z) on seeded triples from the window."""
    rng = random.Random(seed)
    pts = pair.sample(radius, 3 * samples, rng)
    rep = TriangleReport(0)
    key = pair.group.key
    for i in range(samples):
        x, y, z = pts[3 * i: 3 * i + 3]
        lhs = abs(pair.delta(x, y) - pair.delta(x, z))
        rhs = pair.d1(y, z) + pair.d2(y, z)
        rep.checked += 1
        if lhs > rhs:
            rep.violations.append((key(x), key(y), key(z)))
    return rep


def additivity_defect(pair: MetricPair, path: Path, z_index: int) -> Number:
    """|Δ(x,z) + Δ(z,y) - Δ(x,y)| with x, y the path ends and z = path[z_index]."""
    x, y = path.points[0], path.points[-1]
    z = path.points[z_index]
    return abs(pair.delta(x, z) + pair.delta(z, y) - pair.delta(x, y))


@dataclass
class DefectReport:
    max_defect: Number
    argmax: tuple | None
    paths: int


def additivity_defect_batch(pair: MetricPair, samples: int = 50, seed: int = 0, radius=8,
                            endpoints: Sequence[Element] | None = None) -> DefectReport:
    """Max defect over all points of d1-geodesics from 1 to sampled endpoints."""
    rng = random.Random(seed)
    if endpoints is None:
        endpoints = pair.sample(radius, samples, rng)
    base = pair.m1.base
    best, arg = Fraction(0), None
    for g in endpoints:
        path = base.geodesic(g)
        for i in range(len(path.points)):
            d = additivity_defect(pair, path, i)
            if d > best:
                best, arg = d, (pair.group.key(g), i)
    return DefectReport(best, arg, len(endpoints))


# ---- coset lemmas ------------------------------------------------------------


@dataclass
class CosetConstancy:
    L_hat: Number
    per_z: list  # (z key, spread)
    points: int


def coset_constancy(pair: MetricPair, coset, K, radius, z_points: Sequence[Element] | None = None,
                    samples: int = 8, seed: int = 0) -> CosetConstancy:
    """Spread of y -> Δ(z, y) over the K-neighbourhood of a peripheral coset.

    ``y`` runs over ``a h u`` with ``h`` peripheral, ``|u|_1 <= K`` and
    ``|y|_1 <= radius``; ``y = z`` is skipped since Δ(z, z) = 0 trivially.
    """
    from .relhyp import coset_neighbourhood, _require_peripheral

    _require_peripheral(pair.group, coset.factor)
    ys = sorted(coset_neighbourhood(pair.m1.base, coset, K, radius), key=pair.group.key)
    if not ys:
        raise ValueError("empty coset window")
    if z_points is None:
        rng = random.Random(seed)
        z_points = pair.sample(radius, samples, rng)
    worst = Fraction(0)
    per = []
    for z in z_points:
        vals = [pair.delta(z, y) for y in ys if y != z]
        spread = max(vals) - min(vals) if vals else Fraction(0)
        per.append((pair.group.key(z), spread))
        if spread > worst:
            worst = spread
    return CosetConstancy(worst, per, len(ys))


@dataclass
class LipschitzReport:
    P_hat: Number
    outliers: list  # (ratio, x, y, z) top ten
    checked: int
    skipped: int


def relative_lipschitz(pair: MetricPair, samples: int = 2000, seed: int = 0, radius=6,
                       same_coset_fraction: float = 0.5) -> LipschitzReport:
    """max |Δ(x,y) - Δ(x,z)| / d_rel(y, z) over seeded triples.

    A share of the triples takes ``z = y h`` with ``h`` peripheral, where the
    relative distance is 1 and failure of coset constancy shows directly.
    """
    from .relhyp import peripheral_ball, relative_distance

    grp = pair.group
    per = grp.peripherals
    if not per:
        raise ValueError("group has no peripheral structure")
    rng = random.Random(seed)
    gens = pair.m1.gens
    hs = {f: [h for h in peripheral_ball(pair.m1.base, f, radius) if h] for f in per}
    pts = pair.sample(radius, 3 * samples, rng)
    rows = []
    skipped = 0
    for i in range(samples):
        x, y, z = pts[3 * i: 3 * i + 3]
        if rng.random() < same_coset_fraction:
            f = per[rng.randrange(len(per))]
            z = grp.multiply(y, rng.choice(hs[f]))
        dr = relative_distance(gens, y, z)
        if dr == 0:
            skipped += 1
            continue
        ratio = abs(pair.delta(x, y) - pair.delta(x, z)) / dr
        rows.append((ratio, grp.key(x), grp.key(y), grp.key(z)))
    rows.sort(key=lambda r: (-float(r[0]), r[1], r[2], r[3]))
    P = rows[0][0] if rows else Fraction(0)
    return LipschitzReport(P, rows[:10], len(rows), skipped)


# ---- coarse equality ----------------------------------------------------------


@dataclass
class DeltaReport:
    radii: list
    max_abs: list
    argmax: list
    verdict: str
    constant: Number | None = None
    slope: float | None = None
    sqrt_slope: float | None = None
    residual: float | None = None
    shape: str = ""

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["radius", "max_abs_delta", "argmax"])
        for r, m, a in zip(self.radii, self.max_abs, self.argmax):
            w.writerow([format_number(r), format_number(m), a])
        return buf.getvalue()


def _lsq(xs, ys):
    """Least-squares line; exact when inputs are rational."""
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    sxx = sum((x - mx) * (x - mx) for x in xs)
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    slope = sxy / sxx
    icpt = my - slope * mx
    res = [y - (slope * x + icpt) for x, y in zip(xs, ys)]
    rms = math.sqrt(float(sum(r * r for r in res)) / n)
    return slope, icpt, rms


def profile(pair: MetricPair, radii: Sequence) -> tuple[list, list]:
    """max |Δ| and its first maximizer for each radius, over one shared window."""
    radii = [Fraction(r) for r in radii]
    top = enumerate_ball(pair.enum, pair.window_radius(max(radii)))
    elems = top.elements()
    b1, b2 = pair.m1.base, pair.m2.base
    f1, f2 = pair.m1.derivation.apply, pair.m2.derivation.apply
    cache: dict = {}
    vals = []
    for g in elems:
        t = (b1.word_length(g), b2.word_length(g))
        v = cache.get(t)
        if v is None:
            v = cache[t] = abs(f1(t[0]) - f2(t[1]))
        vals.append((top.word_distance(g), v, g))
    maxes, args = [], []
    for r in radii:
        lim = pair.window_radius(r)
        best, arg = Fraction(0), IDENTITY
        for d, v, g in vals:
            if d <= lim and v > best:
                best, arg = v, g
        maxes.append(best)
        args.append(pair.group.key(arg))
    return maxes, args


def coarse_equality_verdict(pair: MetricPair, radii: Sequence) -> DeltaReport:
    """BOUNDED when the last third of the profile is constant, GROWING on a good positive fit."""
    radii = [Fraction(r) for r in radii]
    if len(radii) < 3:
        raise ValueError("need at least three radii")
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly increasing")
    maxes, args = profile(pair, radii)
    rep = DeltaReport(radii, maxes, args, INCONCLUSIVE)
    tail = maxes[-max(2, math.ceil(len(maxes) / 3)):]
    exact = all(is_rational(m) for m in maxes)
    ys = list(maxes) if exact else [float(m) for m in maxes]
    xs = list(radii) if exact else [float(r) for r in radii]
    slope, _, res = _lsq(xs, ys)
    rt = [math.sqrt(float(r)) for r in radii]
    sq_slope, _, sq_res = _lsq(rt, [float(y) for y in ys])
    rep.slope, rep.sqrt_slope = float(slope), sq_slope
    spread = float(max(maxes) - min(maxes))
    if all(t == tail[0] for t in tail):
        rep.verdict, rep.constant = BOUNDED, tail[0]
        rep.residual = res
        return rep
    if sq_res < res:
        rep.shape, rep.residual, fit_slope = "sqrt", sq_res, sq_slope
    else:
        rep.shape, rep.residual, fit_slope = "linear", res, float(slope)
    if fit_slope > 0 and spread > 0 and rep.residual < 0.1 * spread:
        rep.verdict = GROWING
    return rep


def summary_text(items: dict) -> str:
    """Render a flat mapping as sorted ``key: value`` lines (numbers as p/q)."""
    out = []
    for k in sorted(items):
        v = items[k]
        if isinstance(v, (Fraction, int)) and not isinstance(v, bool):
            v = format_number(v)
        elif hasattr(v, "sign"):
            v = format_number(v)
        out.append(f"{k}: {v}")
    return "\n".join(out) + "\n"
