"""Four-point δ estimates, fellow travelling, quasi-geodesic fits and witness search."""

from __future__ import annotations

import csv
import io
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .comparison import MetricPair, _lsq, summary_text
from .errors import BudgetExceeded, OutOfBall
from .groups import IDENTITY, Element
from .metrics import Ball, Metric, enumerate_ball
from .numbers import Number, format_number, is_rational

WITNESS_FOUND = "WITNESS_FOUND"
NO_LARGE_DELTA = "NO_LARGE_DELTA"
INCONCLUSIVE = "INCONCLUSIVE"


def _metric_of(source) -> Metric:
    return source.metric if isinstance(source, Ball) else source


def gromov_product(source, x: Element, y: Element, w: Element = IDENTITY) -> Number:
    """(x . y)_w = (d(w,x) + d(w,y) - d(x,y)) / 2, exactly."""
    m = _metric_of(source)
    if isinstance(source, Ball):
        d = source.distance
    else:
        d = m.distance
    return (d(w, x) + d(w, y) - d(x, y)) / 2


# ---- δ estimation ------------------------------------------------------------


@dataclass
class DeltaEstimate:
    delta: Number
    witness: tuple | None  # (w, x, y, z) keys
    points: int
    mode: str


def _distance_matrix(metric: Metric, pts: Sequence[Element], reach=None):
    """Pairwise distances; looked up in the base ball of radius ``reach`` when it fits the budget."""
    grp = metric.group
    n = len(pts)
    length = metric.length
    if reach is not None:
        try:
            big = enumerate_ball(metric.base, reach)
        except BudgetExceeded:
            big = None
        if big is not None:
            f = metric.derivation.apply
            wd = big.word_distance

            def length(g):
                return f(wd(g)) if g in big else metric.length(g)
    inv = [grp.invert(p) for p in pts]
    vals = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            vals[i][j] = vals[j][i] = length(grp.multiply(inv[i], pts[j]))
    return vals


def estimate_delta(source, samples: int | None = None, seed: int = 0, points: Sequence[Element] | None = None,
                   basepoints: str = "auto", limit: float = 6e7) -> DeltaEstimate:
    """Largest four-point defect min((x.z)_w, (z.y)_w) - (x.y)_w, clamped at 0.

    Without ``samples`` every triple is checked, for every basepoint when the
    window is small (``n^4 <= limit`` or ``basepoints="all"``) and for the
    identity otherwise.  With ``samples``, quadruples are drawn from one seeded
    stream, so more samples can only raise the estimate.
    """
    metric = _metric_of(source)
    if points is None:
        if not isinstance(source, Ball):
            raise ValueError("need a ball or explicit points")
        points = source.elements()
    pts = list(points)
    n = len(pts)
    if n < 4:
        return DeltaEstimate(Fraction(0), None, n, "trivial")
    key = metric.group.key
    if samples is not None:
        return _sampled_delta(metric, pts, samples, seed)
    reach = None
    # the doubled ball has at most n^2 elements, so only bother when that is small
    if isinstance(source, Ball) and n * n <= 500_000:
        reach = 2 * source.base_radius
    M = _distance_matrix(metric, pts, reach)
    if not all(is_rational(v) for row in M for v in row):
        raise ValueError("exhaustive mode needs rational distances; pass samples=")
    den = math.lcm(*(Fraction(v).denominator for row in M for v in row))
    A = np.array([[int(Fraction(v) * den) for v in row] for row in M], dtype=np.int64)
    if basepoints == "all" or (basepoints == "auto" and float(n) ** 4 <= limit):
        ws = range(n)
        mode = "exhaustive(all basepoints)"
    else:
        ident = pts.index(IDENTITY) if IDENTITY in pts else 0
        ws = [ident]
        mode = "exhaustive(basepoint identity)"
    best, wit = 0, None
    for w in ws:
        G = A[w][:, None] + A[w][None, :] - A  # doubled Gromov products
        for z in range(n):
            D = np.minimum.outer(G[:, z], G[z, :]) - G
            idx = int(np.argmax(D))
            v = int(D.flat[idx])
            if v > best:
                x, y = divmod(idx, n)
                best, wit = v, (key(pts[w]), key(pts[x]), key(pts[y]), key(pts[z]))
    return DeltaEstimate(Fraction(best, 2 * den), wit, n, mode)


def _sampled_delta(metric: Metric, pts: list, samples: int, seed: int) -> DeltaEstimate:
    """Four-point defect over seeded quadruples; only the distances they use are computed."""
    grp = metric.group
    n = len(pts)
    memo: dict = {}

    def d(i, j):
        if i == j:
            return Fraction(0)
        if i > j:
            i, j = j, i
        v = memo.get((i, j))
        if v is None:
            v = memo[(i, j)] = metric.distance(pts[i], pts[j])
        return v

    rng = random.Random(seed)
    best, wit = Fraction(0), None
    for _ in range(samples):
        w, x, y, z = (rng.randrange(n) for _ in range(4))
        gxy = d(w, x) + d(w, y) - d(x, y)
        gxz = d(w, x) + d(w, z) - d(x, z)
        gzy = d(w, z) + d(w, y) - d(z, y)
        v = (min(gxz, gzy) - gxy) / 2
        if v > best:
            best, wit = v, tuple(grp.key(pts[i]) for i in (w, x, y, z))
    return DeltaEstimate(best, wit, n, f"sampled({samples})")


# ---- fellow travelling ---------------------------------------------------------


@dataclass
class FellowReport:
    C_fellow: Number
    rows: list  # (endpoint key, h12, h21, excluded points)
    excluded: int = 0
    segments: list = field(default_factory=list)  # (endpoint key, side, first index, length) of excursions

    @property
    def longest_excursion(self) -> int:
        return max((s[3] for s in self.segments), default=0)


def _hausdorff_one_sided(metric: Metric, P, Q):
    best = Fraction(0)
    far = []
    for p in P:
        d = min(metric.distance(p, q) for q in Q)
        far.append((p, d))
        if d > best:
            best = d
    return best, far


def fellow_travel(pair: MetricPair, endpoints: Sequence[Element] | None = None, samples: int = 30,
                  seed: int = 0, radius=8, relative: bool = False, C_proj=Fraction(1),
                  max_excursion: int | None = None) -> FellowReport:
    """Hausdorff distances (in d1) between d1- and d2-geodesics with common ends.

    In ``relative`` mode a point farther than ``C_proj`` from the other geodesic
    is excluded when it lies within ``C_proj`` of a peripheral coset that the
    other geodesic also comes within ``C_proj`` of; such points are counted
    separately and left out of the constant.  Consecutive excluded points form
    excursion segments whose lengths are reported; with ``max_excursion`` set,
    segments longer than that are not excluded after all.
    """
    if endpoints is None:
        endpoints = pair.sample(radius, samples, random.Random(seed))
    m1 = pair.m1.base
    b2 = pair.m2.base
    grp = pair.group
    rows = []
    segs: list = []
    best = Fraction(0)
    excluded_total = 0
    for g in endpoints:
        P = m1.geodesic(g).points
        Q = b2.geodesic(g).points
        h12, far12 = _hausdorff_one_sided(m1, P, Q)
        h21, far21 = _hausdorff_one_sided(m1, Q, P)
        excluded = 0
        if relative and grp.peripherals:
            from .relhyp import coset_of, distance_to_coset

            kept = []
            cosets = sorted({coset_of(grp, q, f) for q in P + Q for f in grp.peripherals},
                            key=lambda c: (c.factor, grp.key(c.rep)))
            for side, far, other in ((1, far12, Q), (2, far21, P)):
                near = [c for c in cosets if min(distance_to_coset(m1, q, c) for q in other) <= C_proj]
                flags = [d > C_proj and any(distance_to_coset(m1, p, c) <= C_proj for c in near) for p, d in far]
                for start, length in _runs(flags):
                    if max_excursion is not None and length > max_excursion:
                        for i in range(start, start + length):
                            flags[i] = False
                    else:
                        segs.append((grp.key(g), side, start, length))
                for (p, d), out in zip(far, flags):
                    if out:
                        excluded += 1
                    else:
                        kept.append(d)
            h12 = h21 = max(kept, default=Fraction(0))
        excluded_total += excluded
        rows.append((grp.key(g), h12, h21, excluded))
        best = max(best, h12, h21)
    return FellowReport(best, rows, excluded_total, segs)


def _runs(flags) -> list:
    """(start, length) of the maximal runs of true values."""
    out, start = [], None
    for i, f in enumerate(list(flags) + [False]):
        if f and start is None:
            start = i
        elif not f and start is not None:
            out.append((start, i - start))
            start = None
    return out


# ---- quasi-geodesics -----------------------------------------------------------


@dataclass
class QuasiGeodesicFit:
    K: Number
    L: Number
    points: int
    violations: list = field(default_factory=list)  # index pairs violating (K_test, L_test)
    K_test: Number | None = None
    L_test: Number | None = None
    truncated: bool = False

    @property
    def fits(self) -> bool:
        return not self.violations

    def exceeds(self, K, L) -> bool:
        return self.K > K or self.L > L


def _to_float_if_needed(x):
    return x if is_rational(x) else float(x)


def check_quasi_geodesic(metric: Metric, points: Sequence[Element], K=None, L=None, params=None,
                         L_cap=Fraction(4), distances=None) -> QuasiGeodesicFit:
    """Fit ``|t_i - t_j|/K - L <= d(p_i, p_j) <= K |t_i - t_j| + L`` over all pairs.

    ``params`` default to the indices.  The best fit reads K off the pairs at
    least half the parameter span apart (at least 1) and takes the least L
    that works with it everywhere; if that L exceeds ``L_cap`` the fit falls
    back to the least K that works with ``L = L_cap``.  Exact when all
    distances are rational.  With ``K, L`` given, the
    violating index pairs are listed.  ``distances`` may supply d(p_i, p_j) as a
    callable ``(i, j) -> number``.
    """
    n = len(points)
    t = list(range(n)) if params is None else list(params)
    if distances is None:
        def distances(i, j):
            return metric.distance(points[i], points[j])
    pairs = []
    for i in range(n):
        for j in range(i + 1, n):
            dt = abs(t[j] - t[i])
            if dt == 0:
                continue
            pairs.append((i, j, Fraction(dt) if is_rational(dt) else float(dt), distances(i, j)))
    L_cap = Fraction(L_cap)
    K_best, L_best = _fit_late(pairs)
    if L_best > L_cap:
        K_best = _k_at(pairs, L_cap)
        L_best = _least_l(pairs, K_best)
    fit = QuasiGeodesicFit(K_best, L_best, n)
    if K is not None and L is not None:
        K, L = Fraction(K), Fraction(L)
        fit.K_test, fit.L_test = K, L
        for i, j, dt, D in pairs:
            if D > K * dt + L or dt / K - L > D:
                fit.violations.append((i, j))
    return fit


def _ratio_bounds(dt, D, L):
    D = _to_float_if_needed(D)
    hi = (D - L) / dt
    lo = math.inf if D + L <= 0 else dt / (D + L)
    return max(hi, lo)


def _k_at(pairs, L) -> Number:
    """Least K >= 1 satisfying both inequalities with additive constant L."""
    K = Fraction(1)
    for _, _, dt, D in pairs:
        K = max(K, _ratio_bounds(dt, D, L))
    return K


def _least_l(pairs, K) -> Number:
    L = Fraction(0)
    if K == math.inf:
        return math.inf
    for _, _, dt, D in pairs:
        D = _to_float_if_needed(D)
        L = max(L, D - K * dt, dt / K - D)
    return L


def _fit_late(pairs):
    """K from well separated pairs (at least half the span apart), then the least L."""
    if not pairs:
        return Fraction(1), Fraction(0)
    span = max(dt for _, _, dt, _ in pairs)
    far = [p for p in pairs if 2 * p[2] >= span]
    K = _k_at(far, 0)
    return K, _least_l(pairs, K)


def power_points(group, f: Element, N: int) -> list:
    pts = [IDENTITY]
    for _ in range(N):
        pts.append(group.multiply(pts[-1], f))
    return pts


def check_quasi_geodesic_powers(metric: Metric, f: Element, N: int, K=None, L=None,
                                reparametrize: bool = False, L_cap=Fraction(4)) -> QuasiGeodesicFit:
    """Fit for ``n -> f^n``, n = 0..N; with ``reparametrize`` the time is ``n d(1,f)``."""
    pts = power_points(metric.group, f, N)
    lengths = {}
    truncated = False
    for n in range(N + 1):
        try:
            lengths[n] = metric.length(pts[n])
        except OutOfBall:
            truncated = True
            pts = pts[:n]
            break
    step = metric.length(f) if reparametrize else 1
    params = [n * step for n in range(len(pts))]

    def dist(i, j):
        return lengths[j - i]  # left invariance: d(f^i, f^j) = |f^(j-i)|

    fit = check_quasi_geodesic(metric, pts, K, L, params=params, L_cap=L_cap, distances=dist)
    fit.truncated = truncated
    return fit


# ---- witness search ------------------------------------------------------------


@dataclass
class WitnessReport:
    verdict: str
    threshold: Number
    max_delta: Number
    g: Element | None = None
    delta_g: Number | None = None
    h: Element | None = None
    delta_h: Number | None = None
    k: Element | None = None
    delta_k: Number | None = None
    choice: str = ""
    f: Element | None = None
    fits: dict = field(default_factory=dict)  # candidate -> (fit d1, fit d2[, fit rel])
    slope: Number | None = None
    residual: float | None = None
    value_range: Number | None = None
    rows: list = field(default_factory=list)  # (n, Δ, d1, d2, d_rel or "")
    nearest: list = field(default_factory=list)  # (n, key of chosen closest point, multiplicity)
    N: int = 0
    group: object = None

    def summary(self) -> str:
        key = self.group.key if self.group is not None else str
        items = {
            "verdict": self.verdict, "threshold": self.threshold, "max_delta": self.max_delta,
            "N": str(self.N), "choice": self.choice or "-",
        }
        for name in ("g", "h", "k", "f"):
            el = getattr(self, name)
            items[name] = key(el) if el is not None else "-"
        for name in ("delta_g", "delta_h", "delta_k", "slope", "value_range"):
            v = getattr(self, name)
            items[name] = v if v is not None else "-"
        items["residual"] = "-" if self.residual is None else f"{self.residual:.6g}"
        if self.nearest:
            items["nearest_multiplicity_max"] = str(max(m for _, _, m in self.nearest))
            items["nearest_points"] = " ".join(f"{n}:{k}" for n, k, _ in self.nearest)
        for cand, fits in sorted(self.fits.items()):
            items[f"fit_{cand}"] = " ".join(
                f"({_fmt(ft.K)},{_fmt(ft.L)})" for ft in fits)
        return summary_text(items)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "delta", "d1", "d2", "d_rel"])
        for n, dl, d1, d2, dr in self.rows:
            w.writerow([n, format_number(dl), format_number(d1), format_number(d2), dr])
        return buf.getvalue()


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.6g}"
    return format_number(x)


def default_threshold(pair: MetricPair, radius=4, samples: int = 20, seed: int = 0) -> Number:
    """8 (δ̂ + Ĉ_fellow + 1) from a small window of the first metric."""
    ball = enumerate_ball(pair.m1.base, radius)
    d = estimate_delta(ball, samples=2000, seed=seed).delta
    c = fellow_travel(pair, samples=samples, seed=seed, radius=radius).C_fellow
    return 8 * (d + c + 1)


def witness_search(pair: MetricPair, radius, N: int = 8, delta_threshold=None, *, K_cap=Fraction(2),
                   L_cap=Fraction(4), relative: bool | None = None, seed: int = 0) -> WitnessReport:
    """Halving construction: from a large Δ(g) find f with Δ(1, f^n) growing linearly.

    ``g`` maximizes |Δ| over the window (first in window order).  ``h`` is the
    prefix of a d1-geodesic 1 -> g with Δ(h) closest to Δ(g)/2 (earliest on
    ties) and ``k = h^-1 g``.  Each of h, k, g whose powers pass the
    quasi-geodesic test (K <= K_cap, L <= L_cap after reparametrizing by the
    element's length, in both metrics and, with ``relative``, in the relative
    metric) is a candidate; the one with the largest |Δ(f^N)| is kept.  The
    slope is a least-squares fit of Δ(1, f^n) over n in [N/2, N], exact for
    rational data; WITNESS_FOUND needs slope >= threshold/4 and residual below
    10% of the fitted range.
    """
    grp = pair.group
    if delta_threshold is None:
        delta_threshold = default_threshold(pair, seed=seed)
    delta_threshold = Fraction(delta_threshold) if is_rational(delta_threshold) else delta_threshold
    if relative is None:
        relative = bool(grp.peripherals)
    window = pair.window(radius)
    best, g = Fraction(0), IDENTITY
    for x in window:
        v = abs(pair.delta(x))
        if v > best:
            best, g = v, x
    rep = WitnessReport(NO_LARGE_DELTA, delta_threshold, best, N=N, group=grp)
    if best < delta_threshold:
        return rep
    dg = pair.delta(g)
    rep.g, rep.delta_g = g, dg
    path = pair.m1.base.geodesic(g)
    target = dg / 2
    h, gap = IDENTITY, None
    for p in path.points:
        d = abs(pair.delta(p) - target)
        if gap is None or d < gap:
            h, gap = p, d
    k = grp.multiply(grp.invert(h), g)
    rep.h, rep.delta_h = h, pair.delta(h)
    rep.k, rep.delta_k = k, pair.delta(k)

    chosen, chosen_val = None, None
    for name, f in (("h", h), ("k", k), ("g", g)):
        if not f:
            continue
        fits = [check_quasi_geodesic_powers(m, f, N, reparametrize=True, L_cap=L_cap) for m in (pair.m1, pair.m2)]
        if relative:
            fits.append(_relative_fit(pair, f, N, L_cap))
        rep.fits[name] = fits
        if any(ft.truncated for ft in fits):
            continue
        if all(ft.K <= K_cap and ft.L <= L_cap for ft in fits):
            val = abs(pair.delta(grp.power(f, N)))
            if chosen is None or val > chosen_val:
                chosen, chosen_val = (name, f), val
    if chosen is None:
        rep.verdict = INCONCLUSIVE
        return rep
    rep.choice, rep.f = chosen
    f = rep.f
    gens_rel = pair.m1.gens
    p = IDENTITY
    ns, ds = [], []
    for n in range(N + 1):
        dr = ""
        if relative:
            from .relhyp import relative_length

            dr = str(relative_length(gens_rel, p))
        d1, d2 = pair.m1.length(p), pair.m2.length(p)
        rep.rows.append((n, d1 - d2, d1, d2, dr))
        if 2 * n >= N:
            ns.append(n)
            ds.append(d1 - d2)
        p = grp.multiply(p, f)
    if relative:
        rep.nearest = _nearest_on_relative_geodesic(pair, f, N)
    exact = all(is_rational(v) for v in ds)
    xs = [Fraction(n) for n in ns] if exact else [float(n) for n in ns]
    ys = ds if exact else [float(v) for v in ds]
    slope, _, res = _lsq(xs, ys)
    sign = 1 if ds[-1] >= ds[0] else -1
    rep.slope = slope
    rep.residual = res
    rep.value_range = max(ds) - min(ds)
    if sign * slope >= delta_threshold / 4 and float(rep.value_range) > 0 and res < 0.1 * float(rep.value_range):
        rep.verdict = WITNESS_FOUND
    else:
        rep.verdict = INCONCLUSIVE
    return rep


def _relative_fit(pair: MetricPair, f: Element, N: int, L_cap) -> QuasiGeodesicFit:
    from .relhyp import relative_length

    gens = pair.m1.gens
    pts = power_points(pair.group, f, N)
    lengths = [relative_length(gens, p) for p in pts]
    step = lengths[1] if len(lengths) > 1 else 1

    def dist(i, j):
        return lengths[j - i]

    return check_quasi_geodesic(pair.m1, pts, params=[n * step for n in range(len(pts))], L_cap=L_cap,
                                distances=dist)


def _nearest_on_relative_geodesic(pair: MetricPair, f: Element, N: int) -> list:
    """Closest points (in d1) to each f^n on a lifted relative geodesic from 1 to f^N.

    Closest points need not be unique; the least by element key is kept and
    the number of ties recorded.
    """
    from .relhyp import lift_relative_geodesic, relative_geodesic

    grp = pair.group
    m1 = pair.m1
    path, _ = lift_relative_geodesic(m1, relative_geodesic(m1.gens, grp.power(f, N)))
    line = sorted(set(path.points), key=grp.key)
    out = []
    p = IDENTITY
    for n in range(N + 1):
        ds = [(m1.distance(p, y), y) for y in line]
        d0 = min(d for d, _ in ds)
        ties = [y for d, y in ds if d == d0]
        out.append((n, grp.key(ties[0]), len(ties)))
        p = grp.multiply(p, f)
    return out
