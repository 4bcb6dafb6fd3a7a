"""Translation lengths, marked length spectra and abelian deviation bounds."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Sequence

from .errors import OutOfBall
from .groups import Element, cyclic_reduce
from .metrics import Ball, Metric
from .numbers import Number, format_number

HYPERBOLIC = "hyperbolic"
NON_HYPERBOLIC = "non-hyperbolic"
UNDECIDED = "inconclusive"

SAME = "SAME"
DIFFERENT = "DIFFERENT"
INCONCLUSIVE = "INCONCLUSIVE"


@dataclass
class TranslationLengthEstimate:
    element: Element
    upper: Number  # inf over n of d(1, g^n)/n, a certified upper bound
    recent_slope: Number
    n_max: int
    exact: Number | None = None
    profile: list = field(default_factory=list)  # d(1, g^n) for n = 0..n_max
    truncated: bool = False
    raw_slope: Number = 0

    @property
    def value(self) -> Number:
        """Best available value: the exact one, else the recent slope."""
        return self.exact if self.exact is not None else self.recent_slope

    @property
    def bracket(self) -> tuple:
        if self.exact is not None:
            return (self.exact, self.exact)
        return (self.recent_slope, self.upper)

    def slope_at(self, m: int) -> Number:
        return (self.profile[2 * m] - self.profile[m]) / m

    def classify(self) -> str:
        """Hyperbolic / non-hyperbolic / inconclusive, see module notes."""
        if self.exact is not None:
            return HYPERBOLIC if self.exact > 0 else NON_HYPERBOLIC
        prof, n_max = self.profile, self.n_max
        # a window-truncated profile is too short to separate √n from n
        if n_max < 2 or self.truncated:
            return UNDECIDED
        s = self.recent_slope
        if s > Fraction(1, n_max):
            eps = s / 2
            m = n_max // 2
            # a sublinear profile shows up as slopes shrinking across scales
            steady = m < 2 or self.slope_at(m) * 8 >= self.slope_at(m // 2) * 7
            if steady and all(prof[n] >= eps * n for n in range(1, n_max + 1)):
                return HYPERBOLIC
            return UNDECIDED
        dev = [prof[n] - n * s for n in range(n_max + 1)]
        half = n_max // 2
        increasing = dev[n_max] > dev[half] >= dev[1]
        late = (dev[n_max] - dev[half]) / (n_max - half)
        early = (dev[half] - dev[1]) / max(half - 1, 1)
        if increasing and late <= early:
            return NON_HYPERBOLIC
        return UNDECIDED


def _powers(metric: Metric, g: Element, n_max: int, ball: Ball | None):
    grp = metric.group
    prof = [Fraction(0)]
    p = ()
    for n in range(1, n_max + 1):
        p = grp.multiply(p, g)
        if ball is not None:
            if p not in ball:
                return prof, True
            prof.append(ball.distance(p))
        else:
            try:
                prof.append(metric.length(p))
            except OutOfBall:
                return prof, True
    return prof, False


def translation_length(metric: Metric, g: Element, n_max: int = 24, ball: Ball | None = None,
                       use_oracle: bool = True) -> TranslationLengthEstimate:
    """Fekete bound and late slope of ``n -> d(1, g^n)``.

    With a ball, powers leaving it truncate ``n_max`` (reported through
    ``truncated``); without one, distances come from exact targeted search.
    """
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    if not g:
        return TranslationLengthEstimate(g, Fraction(0), Fraction(0), n_max, Fraction(0), [Fraction(0)] * (n_max + 1))
    prof, truncated = _powers(metric, g, n_max, ball)
    n_eff = len(prof) - 1
    exact = exact_translation_length_oracle(metric, g) if use_oracle else None
    if n_eff < 1:
        return TranslationLengthEstimate(g, Fraction(0), Fraction(0), 0, exact, prof, True)
    upper = min(prof[n] / n for n in range(1, n_eff + 1))
    if exact is None and use_oracle and metric.is_word and abelian_lower_bound(metric, g) == upper:
        exact = upper  # the two bounds meet
    if n_eff >= 2:
        m = n_eff // 2
        raw = (prof[2 * m] - prof[m]) / m
    else:
        raw = upper
    slope = raw
    if slope < 0:
        slope = Fraction(0)
    if slope > upper:
        slope = upper
    return TranslationLengthEstimate(g, upper, slope, n_eff, exact, prof, truncated, raw)


# ---- exact oracles -----------------------------------------------------------


def _solve(cols: list[tuple], rhs: tuple) -> list[Fraction] | None:
    """Solve the square system ``sum x_i cols[i] = rhs`` exactly, None if singular."""
    n = len(rhs)
    A = [[Fraction(cols[j][i]) for j in range(n)] + [Fraction(rhs[i])] for i in range(n)]
    for c in range(n):
        piv = next((r for r in range(c, n) if A[r][c] != 0), None)
        if piv is None:
            return None
        A[c], A[piv] = A[piv], A[c]
        for r in range(n):
            if r != c and A[r][c] != 0:
                f = A[r][c] / A[c][c]
                A[r] = [a - f * b for a, b in zip(A[r], A[c])]
    return [A[i][n] / A[i][i] for i in range(n)]


def stable_norm(vectors: Sequence[tuple], weights: Sequence[Fraction], g: tuple) -> Fraction:
    """min sum w_i l_i subject to sum l_i v_i = g, l >= 0 (vertex enumeration)."""
    n = len(g)
    if not any(g):
        return Fraction(0)
    best = None
    for subset in combinations(range(len(vectors)), n):
        sol = _solve([vectors[i] for i in subset], g)
        if sol is None or any(x < 0 for x in sol):
            continue
        cost = sum(weights[i] * x for i, x in zip(subset, sol))
        if best is None or cost < best:
            best = cost
    if best is None:
        raise ValueError("generators do not span")
    return best


def _flat_vector(grp, el) -> tuple:
    if not el:
        return tuple(0 for _ in range(grp.factor_rank(0)))
    (_, payload), = el
    return tuple(x for v in payload for x in v)


def abelian_image(grp, el: Element) -> tuple:
    """Image of ``el`` in the free abelian quotient (letter exponent sums, Z coordinates, H3 (a, b))."""
    offsets, dim = [], 0
    for atoms in grp.factors:
        row = []
        for a in atoms:
            row.append(dim)
            dim += 2 if a.kind == "H3" else a.rank
        offsets.append(row)
    out = [0] * dim
    for f, payload in el:
        for a, off, v in zip(grp.factors[f], offsets[f], payload):
            if a.kind == "F":
                for x in v:
                    out[off + abs(x) - 1] += 1 if x > 0 else -1
            elif a.kind == "Z":
                for i, x in enumerate(v):
                    out[off + i] += x
            else:
                out[off] += v[0]
                out[off + 1] += v[1]
    return tuple(out)


def abelian_lower_bound(metric: Metric, g: Element) -> Fraction:
    """Stable norm of the abelian image of ``g``; never exceeds the translation length."""
    grp = metric.group
    gens = metric.base.gens
    vecs = [abelian_image(grp, s) for s in gens.elements]
    target = abelian_image(grp, g)
    if not any(target):
        return Fraction(0)
    # drop coordinates no generator touches (they are then zero in the target too)
    used = [i for i in range(len(target)) if any(v[i] for v in vecs)]
    vecs = [tuple(v[i] for i in used) for v in vecs]
    return stable_norm(vecs, gens.weights, tuple(target[i] for i in used))


def exact_translation_length_oracle(metric: Metric, g: Element) -> Fraction | None:
    """Exact ``|g|`` for word metrics on one free or free abelian atom.

    ``translation_length`` additionally certifies a value whenever the abelian
    lower bound meets the Fekete upper bound.

    Perturbed metrics share the translation lengths of their base metric since
    the perturbation is sublinear.  Returns ``None`` when no oracle applies.
    """
    grp = metric.group
    gens = metric.gens
    if len(grp.factors) != 1:
        return None
    atoms = grp.factors[0]
    if all(a.kind == "Z" for a in atoms):
        vecs = [_flat_vector(grp, s) for s in gens.elements]
        return stable_norm(vecs, gens.weights, _flat_vector(grp, g))
    if len(atoms) == 1 and atoms[0].kind == "F":
        weight = {}
        for s, w in zip(gens.elements, gens.weights):
            letters = s[0][1][0]
            if len(letters) != 1:
                return None
            weight[letters[0]] = w
        if len(weight) != 2 * atoms[0].rank:
            return None
        core, _ = cyclic_reduce(grp, g)
        return sum((weight[x] for x in (core[0][1][0] if core else ())), Fraction(0))
    return None


# ---- spectra -------------------------------------------------------------------


@dataclass
class SpectrumRow:
    element: Element
    first: TranslationLengthEstimate
    second: TranslationLengthEstimate
    verdict: str
    classes: tuple


@dataclass
class SpectrumComparison:
    verdict: str
    rows: list
    witness: Element | None = None
    m1: Metric = None
    m2: Metric = None

    def to_csv(self) -> str:
        return spectrum_csv(self)


def _overlap(b1, b2, tol) -> bool:
    return b1[0] <= b2[1] + tol and b2[0] <= b1[1] + tol


def compare_spectra(m1: Metric, m2: Metric, elements: Sequence[Element], n_max: int = 24,
                    tol=Fraction(0), balls: tuple = (None, None)) -> SpectrumComparison:
    """Compare marked length spectra on the given elements.

    DIFFERENT needs one element whose brackets are disjoint (beyond ``tol``)
    with an exact value on at least one side, or whose hyperbolic
    classifications disagree decisively; SAME needs every bracket pair to
    overlap and no decisive disagreement.  Anything else is INCONCLUSIVE.
    """
    if not elements:
        raise ValueError("need at least one element")
    tol = Fraction(tol)
    rows = []
    witness = None
    verdict = SAME
    for g in elements:
        e1 = translation_length(m1, g, n_max, balls[0])
        e2 = translation_length(m2, g, n_max, balls[1])
        c1, c2 = e1.classify(), e2.classify()
        if e1.n_max < 2 or e2.n_max < 2:
            row = INCONCLUSIVE
        elif not _overlap(e1.bracket, e2.bracket, tol):
            row = DIFFERENT
        elif UNDECIDED not in (c1, c2) and c1 != c2:
            row = DIFFERENT
        else:
            row = SAME
        if row == DIFFERENT and e1.exact is None and e2.exact is None and UNDECIDED in (c1, c2):
            row = INCONCLUSIVE
        rows.append(SpectrumRow(g, e1, e2, row, (c1, c2)))
        if row == DIFFERENT and witness is None:
            witness = g
    if witness is not None:
        verdict = DIFFERENT
    elif any(r.verdict == INCONCLUSIVE for r in rows):
        verdict = INCONCLUSIVE
    return SpectrumComparison(verdict, rows, witness, m1, m2)


def spectrum_csv(cmp: SpectrumComparison) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["element", "metric-id", "upper", "recent_slope", "exact", "verdict"])
    grp = cmp.m1.group
    for row in cmp.rows:
        for m, est in ((cmp.m1, row.first), (cmp.m2, row.second)):
            w.writerow([
                grp.key(row.element), m.name, format_number(est.upper), format_number(est.recent_slope),
                "" if est.exact is None else format_number(est.exact), row.verdict,
            ])
    return buf.getvalue()


# ---- deviation bounds on abelian groups --------------------------------------


@dataclass
class BuragoRow:
    element: Element
    translation: Fraction
    deviations: list
    max_deviation: Number
    growth: bool
    truncated_at: int | None = None


@dataclass
class BuragoReport:
    rows: list
    C_hat: Number
    growth_flags: int

    @property
    def truncations(self) -> int:
        return sum(1 for r in self.rows if r.truncated_at is not None)


def burago_check(metric: Metric, elements: Sequence[Element], n_max: int = 60,
                 ball: Ball | None = None) -> BuragoReport:
    """Deviation ``|d(1, g^n) - n |g||`` against the exact translation length.

    A growth flag is raised for an element whose deviations over the last
    third of ``1..n`` exceed every earlier deviation (still increasing at the
    largest computed powers).
    """
    rows = []
    for g in elements:
        tau = exact_translation_length_oracle(metric, g)
        if tau is None:
            raise ValueError(f"no exact oracle for {metric.group.key(g)}")
        prof, truncated = _powers(metric, g, n_max, ball)
        n_eff = len(prof) - 1
        devs = [abs(prof[n] - n * tau) for n in range(1, n_eff + 1)]
        mx = max(devs, default=Fraction(0))
        growth = False
        if n_eff >= 3:
            cut = n_eff - n_eff // 3
            growth = max(devs[cut:]) > max(devs[:cut])
        rows.append(BuragoRow(g, tau, devs, mx, growth, n_eff if truncated else None))
    C_hat = max((r.max_deviation for r in rows), default=Fraction(0))
    return BuragoReport(rows, C_hat, sum(r.growth for r in rows))
