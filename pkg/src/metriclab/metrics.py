"""Left-invariant metrics: weighted word metrics and perturbations of them.

A word metric is realized two ways that share one cache per generating set:

* exhaustive balls by uniform-cost search (a bucket queue over integer-scaled
  weights, so distances are exact rationals), and
* targeted exact distances by A* with the admissible heuristic
  ``lam * std_lower_bound(y^-1 g)``, where ``lam = min_s w(s) / |s|_std``.

Derived metrics apply ``f(t) = t + c*[t > 0]`` or ``f(t) = t + sqrt(t)`` to the
word length and reuse the word-metric machinery.
"""

from __future__ import annotations

import gc
import heapq
import math
import operator
import os
import random
from collections.abc import Mapping
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

from .errors import BudgetExceeded, CacheMismatch, ElementError, NonWordMetric, NotGenerating, OutOfBall
from .groups import IDENTITY, Element, GroupSpec
from .numbers import Number, format_number, sqrt

DEFAULT_BUDGET = 4_000_000
ASTAR_BUDGET = 100_000


# ---- generating sets ---------------------------------------------------------


class GeneratingSet(Mapping):
    """Weighted, symmetric generating set; a mapping ``label -> Element``.

    Inverses are added automatically with label ``<label>^-1`` unless the
    inverse was declared explicitly.  Iteration order is declaration order with
    each inverse right after its generator; this order fixes tie-breaking.
    """

    def __init__(self, group: GroupSpec, generators: Sequence[tuple]):
        self.group = group
        declared: list[tuple[str, Element, Fraction]] = []
        for item in generators:
            label, el = item[0], item[1]
            w = Fraction(item[2]) if len(item) > 2 else Fraction(1)
            if w <= 0:
                raise ValueError(f"weight of {label!r} must be positive")
            group.validate(el)
            if not el:
                raise ElementError(f"generator {label!r} is the identity")
            declared.append((label, el, w))
        self.declared = tuple(declared)

        labels, elems, weights = [], [], []
        seen: dict[Element, int] = {}
        for label, el, w in declared:
            if label in labels:
                raise ValueError(f"duplicate generator label {label!r}")
            if el in seen:
                if weights[seen[el]] != w:
                    raise ValueError(f"generator {label!r} repeats an element with another weight")
                continue
            for e in (el, group.invert(el)):
                if e in seen:
                    continue
                seen[e] = len(elems)
                labels.append(label if e is el else f"{label}^-1")
                elems.append(e)
                weights.append(w)
        self.labels: tuple[str, ...] = tuple(labels)
        self.elements: tuple[Element, ...] = tuple(elems)
        self.weights: tuple[Fraction, ...] = tuple(weights)
        self.scale = math.lcm(*(w.denominator for w in weights))
        self.int_weights: tuple[int, ...] = tuple(int(w * self.scale) for w in weights)
        self.index = {lab: i for i, lab in enumerate(labels)}

    @classmethod
    def standard(cls, group: GroupSpec, extra: Sequence[tuple] = ()) -> "GeneratingSet":
        return cls(group, [(lab, el, 1) for lab, el in group.standard_generators()] + list(extra))

    @classmethod
    def from_words(cls, group: GroupSpec, spec: Sequence[tuple]) -> "GeneratingSet":
        """Build from ``(label, word text[, weight])`` with words over standard labels."""
        gens = []
        for item in spec:
            el = group.parse_element(item[1])
            gens.append((item[0], el) + tuple(item[2:]))
        return cls(group, gens)

    def __getitem__(self, label):
        return self.elements[self.index[label]]

    def __iter__(self):
        return iter(self.labels)

    def __len__(self):
        return len(self.labels)

    def weight(self, label: str) -> Fraction:
        return self.weights[self.index[label]]

    @property
    def fingerprint(self) -> str:
        parts = [f"{lab}={self.group.key(el)}@{format_number(w)}" for lab, el, w in self.declared]
        return f"{self.group.canonical_text}/" + ";".join(parts)

    def __repr__(self):
        return f"GeneratingSet({self.fingerprint})"


# ---- derivations -----------------------------------------------------------


@dataclass(frozen=True)
class Derivation:
    kind: str = "word"  # "word", "additive" or "concave"
    c: Fraction = Fraction(0)

    def __post_init__(self):
        if self.kind not in ("word", "additive", "concave"):
            raise ValueError(f"unknown derivation {self.kind!r}")
        object.__setattr__(self, "c", Fraction(self.c))
        if self.c < 0:
            raise ValueError("additive constant must be non-negative")

    def apply(self, t: Fraction) -> Number:
        if self.kind == "word" or t == 0:
            return t
        if self.kind == "additive":
            return t + self.c
        return t + sqrt(t)

    def base_bound(self, r: Fraction) -> Fraction:
        """Largest word length t could have with ``apply(t) <= r`` (upper bound)."""
        if self.kind == "additive":
            return r - self.c if r >= self.c else Fraction(0)
        return r

    def base_radius(self, r: Fraction, scale: int = 1) -> Fraction:
        """Largest t on the grid ``(1/scale) Z`` with ``apply(t) <= r``."""
        r = Fraction(r)
        if r < 0:
            raise ValueError("negative radius")
        t = Fraction(math.floor(self.base_bound(r) * scale), scale)
        while t > 0 and self.apply(t) > r:
            if self.kind == "concave":
                # jump close to the root of t + sqrt(t) = r, then walk
                est = Fraction(math.floor(((math.sqrt(1 + 4 * float(r)) - 1) / 2) ** 2 * scale) + 1, scale)
                if est < t:
                    t = est
                    continue
            t -= Fraction(1, scale)
        return t

    def __str__(self):
        if self.kind == "additive":
            return f"additive({format_number(self.c)})"
        return self.kind


WORD = Derivation()


def additive(c=1) -> Derivation:
    return Derivation("additive", Fraction(c))


def concave() -> Derivation:
    return Derivation("concave")


# ---- paths -----------------------------------------------------------------


@dataclass
class Path:
    """Points ``p_0 .. p_L`` joined by generator steps."""

    points: list
    labels: list
    length: Fraction

    def __len__(self):
        return len(self.labels)

    @property
    def start(self):
        return self.points[0]

    @property
    def end(self):
        return self.points[-1]


# ---- the shared search engine ----------------------------------------------


class _Engine:
    """Ball and A* state for one generating set (base word metric)."""

    def __init__(self, gens: GeneratingSet, budget: int):
        self.gens = gens
        self.group = gens.group
        self.budget = budget
        self.w = gens.int_weights
        self.scale = gens.scale
        # settled ball: element -> scaled distance, predecessor generator index
        self.dist: dict[Element, int] = {IDENTITY: 0}
        self.pred: dict[Element, int] = {IDENTITY: -1}
        self.order: list[Element] = [IDENTITY]
        self.level_end: dict[int, int] = {0: 1}  # level -> len(order) after it
        self.completed = 0  # scaled radius fully settled
        self._tent: dict[Element, int] = {}
        self._buckets: dict[int, list] = {}
        self._started = False
        self.memo: dict[Element, int] = {IDENTITY: 0}
        self.astar_memo_paths = 0
        self._lam = None
        self._heur = None
        self.loaded_from_cache = False

    # -- uniform-cost ball --

    def _relax(self, u: Element, du: int):
        mul = self.group.multiply
        tent, buckets, settled = self._tent, self._buckets, self.dist
        for i, s in enumerate(self.gens.elements):
            v = mul(u, s)
            if v in settled:
                continue
            nd = du + self.w[i]
            old = tent.get(v)
            if old is None or nd < old:
                tent[v] = nd
                self.pred[v] = i
                buckets.setdefault(nd, []).append(v)

    def grow(self, radius_scaled: int):
        if radius_scaled <= self.completed and self._started:
            return
        if not self._started:
            self._started = True
            self._relax(IDENTITY, 0)
        # large tuple-keyed dicts make the cyclic collector dominate; pause it
        enabled = gc.isenabled()
        gc.disable()
        try:
            self._grow(radius_scaled)
        finally:
            if enabled:
                gc.enable()
        self.completed = max(self.completed, radius_scaled)

    def _grow(self, radius_scaled: int):
        buckets, tent = self._buckets, self._tent
        while buckets:
            level = min(buckets)
            if level > radius_scaled:
                break
            fresh = [v for v in buckets[level] if tent.get(v) == level]
            # remove duplicates while keeping first appearance
            seen = set()
            batch = []
            for v in fresh:
                if v not in seen:
                    seen.add(v)
                    batch.append(v)
            if len(self.order) + len(batch) > self.budget:
                raise BudgetExceeded(
                    len(self.order), Fraction(self.completed, self.scale), self.budget
                )
            del buckets[level]
            memo = self.memo
            for v in batch:
                del tent[v]
                self.dist[v] = level
                memo[v] = level
                self.order.append(v)
            self.level_end[level] = len(self.order)
            for v in batch:
                self._relax(v, level)
            self.completed = level

    # -- A* --

    def lam(self) -> Fraction:
        if self._lam is None:
            lb = []
            for el, w in zip(self.gens.elements, self.gens.weights):
                lb.append(Fraction(w) / _standard_length(self.group, el))
            self._lam = min(lb)
        return self._lam

    def heuristic(self):
        """``(h, den)``: ``h(x) / den`` bounds the scaled word length of x from below."""
        if self._heur is None:
            self._heur = _build_heuristic(self)
        return self._heur

    def astar(self, target: Element, budget: int = ASTAR_BUDGET, want_path: bool = False):
        """Exact scaled word length of ``target`` (and a geodesic if asked)."""
        if not want_path and target in self.memo:
            return self.memo[target], None
        if target in self.dist and want_path:
            return self.dist[target], self._ball_path(target)
        grp = self.group
        mul, inv = grp.multiply, grp.invert
        hfun, den = self.heuristic()
        w = self.w
        gens = self.gens.elements

        def h(y):
            return hfun(mul(inv(y), target))

        best = {IDENTITY: 0}
        parent: dict[Element, tuple] = {IDENTITY: (None, -1)}
        heap = [(h(IDENTITY), 0, 0, IDENTITY)]
        counter = 1
        expanded = 0
        while heap:
            _, _, gu, u = heapq.heappop(heap)
            if gu != best.get(u):
                continue
            if u == target:
                path = self._unwind(parent, u)
                # every prefix of an optimal path is optimal
                for el in path[0]:
                    self.memo.setdefault(el, best[el])
                return gu, (path if want_path else None)
            expanded += 1
            if expanded > budget:
                raise OutOfBall(target, "budget", f"A* expanded {budget} nodes")
            for i, s in enumerate(gens):
                v = mul(u, s)
                nd = gu + w[i]
                if nd < best.get(v, nd + 1):
                    best[v] = nd
                    parent[v] = (u, i)
                    heapq.heappush(heap, (nd * den + h(v), counter, nd, v))
                    counter += 1
        raise OutOfBall(target, "budget", "search space exhausted")

    def _unwind(self, parent, u):
        pts, labs = [u], []
        while parent[u][0] is not None:
            prev, i = parent[u]
            labs.append(self.gens.labels[i])
            pts.append(prev)
            u = prev
        pts.reverse()
        labs.reverse()
        return pts, labs

    def _ball_path(self, g: Element):
        pts, labs = [g], []
        inv, mul = self.group.invert, self.group.multiply
        while g:
            i = self.pred[g]
            labs.append(self.gens.labels[i])
            g = mul(g, inv(self.gens.elements[i]))
            pts.append(g)
        pts.reverse()
        labs.reverse()
        return pts, labs

    def word_length(self, g: Element) -> int:
        d = self.memo.get(g)
        if d is not None:
            return d
        d, _ = self.astar(g)
        self.memo[g] = d
        return d


def _letter_counts(k: int):
    def feat(payload):
        out = [0] * (2 * k)
        for x in payload[0]:
            out[x - 1 if x > 0 else k - x - 1] += 1
        return out
    return feat


def _flat(payload):
    return [x for v in payload for x in v]


def _dual_vertices(rows, rhs, nonneg: bool, limit: int = 60_000):
    """Vertices of ``{p : rows . p <= rhs}`` (plus ``p >= 0`` when asked)."""
    from itertools import combinations

    dim = len(rows[0])
    cons = [(list(map(Fraction, r)), Fraction(b)) for r, b in zip(rows, rhs)]
    if nonneg:
        for i in range(dim):
            e = [Fraction(0)] * dim
            e[i] = Fraction(-1)
            cons.append((e, Fraction(0)))
    if math.comb(len(cons), dim) > limit:
        return None
    verts = set()
    for sub in combinations(range(len(cons)), dim):
        A = [cons[i][0][:] + [cons[i][1]] for i in sub]
        ok = True
        for c in range(dim):
            piv = next((r for r in range(c, dim) if A[r][c] != 0), None)
            if piv is None:
                ok = False
                break
            A[c], A[piv] = A[piv], A[c]
            for r in range(dim):
                if r != c and A[r][c] != 0:
                    f = A[r][c] / A[c][c]
                    A[r] = [a - f * b for a, b in zip(A[r], A[c])]
        if not ok:
            continue
        p = tuple(A[i][dim] / A[i][i] for i in range(dim))
        if all(sum(a * x for a, x in zip(r, p)) <= b for r, b in cons):
            verts.add(p)
    return sorted(verts)


def _factor_heuristic(eng: "_Engine", f: int, gen_idx: list):
    """Features and dual vertices bounding the length of one factor's syllables."""
    grp = eng.group
    atoms = grp.factors[f]
    payloads = [eng.gens.elements[i][0][1] for i in gen_idx]
    w = [eng.w[i] for i in gen_idx]
    verts = None
    if len(atoms) == 1 and atoms[0].kind == "F":
        feat = _letter_counts(atoms[0].rank)
        verts = _dual_vertices([feat(p) for p in payloads], w, nonneg=True)
    elif all(a.kind == "Z" for a in atoms):
        feat = _flat
        verts = _dual_vertices([feat(p) for p in payloads], w, nonneg=False)
    if not verts:
        def feat(payload, f=f):
            return [grp.std_length_lower_bound(((f, payload),))]
        lam = min(Fraction(wi) / _standard_length(grp, eng.gens.elements[i]) for wi, i in zip(w, gen_idx))
        verts = [(lam,)]
    return feat, verts


def _build_heuristic(eng: "_Engine"):
    """Return ``(h, den)`` with ``h(x) / den`` a lower bound on the scaled length.

    When every generator is a single syllable, the word length is the sum of
    the syllable lengths in the factor generating sets, and each syllable is
    bounded below by the dual of a covering LP (stable norm for free abelian
    factors, signed letter counts for free factors).  Otherwise a single
    ratio ``min w(s)/|s|_std`` times the standard length bound is used.
    """
    grp = eng.group
    gens = eng.gens.elements
    by_factor: dict[int, list] = {}
    if all(len(s) == 1 for s in gens):
        for i, s in enumerate(gens):
            by_factor.setdefault(s[0][0], []).append(i)
    if len(by_factor) == len(grp.factors):
        parts = {f: _factor_heuristic(eng, f, idx) for f, idx in by_factor.items()}
        den = math.lcm(*(x.denominator for _, vs in parts.values() for v in vs for x in v))
        table = {f: (feat, [tuple(int(x * den) for x in v) for v in vs]) for f, (feat, vs) in parts.items()}

        cache: dict = {}
        mul = operator.mul

        def h(el):
            total = 0
            for syl in el:
                v = cache.get(syl)
                if v is None:
                    feat, vs = table[syl[0]]
                    x = feat(syl[1])
                    v = max(sum(map(mul, u, x)) for u in vs)
                    if len(cache) < 1_000_000:
                        cache[syl] = v
                total += v
            return total
        return h, den
    lam = eng.lam() * eng.scale
    num, den = lam.numerator, lam.denominator
    lb = grp.std_length_lower_bound
    return (lambda el: num * lb(el)), den


_STD_CACHE: dict = {}


def _standard_length(group: GroupSpec, el: Element) -> int:
    """Exact word length of ``el`` in the standard generators."""
    if all(a.kind != "H3" for f in group.factors for a in f):
        return group.std_length_lower_bound(el)
    key = (group, el)
    if key not in _STD_CACHE:
        eng = _engine_for(GeneratingSet.standard(group), DEFAULT_BUDGET)
        eng._lam = Fraction(1)
        if eng._heur is None:
            eng._heur = (group.std_length_lower_bound, 1)
        _STD_CACHE[key] = eng.word_length(el)
    return _STD_CACHE[key]


_ENGINES: dict[str, _Engine] = {}


def _engine_for(gens: GeneratingSet, budget: int) -> _Engine:
    fp = gens.fingerprint
    eng = _ENGINES.get(fp)
    if eng is None:
        eng = _Engine(gens, budget)
        _ENGINES[fp] = eng
    eng.budget = max(eng.budget, budget)
    return eng


def clear_engines():
    """Drop all cached balls and A* memo tables."""
    _ENGINES.clear()
    _STD_CACHE.clear()


# ---- metrics ---------------------------------------------------------------


class Metric:
    """A left-invariant metric ``d(x, y) = f(|x^-1 y|_S)``."""

    def __init__(self, gens: GeneratingSet, derivation: Derivation = WORD, budget: int = DEFAULT_BUDGET, name: str = ""):
        self.group = gens.group
        self.gens = gens
        self.derivation = derivation
        self.name = name or str(derivation)
        self._engine = _engine_for(gens, budget)

    @property
    def is_word(self) -> bool:
        return self.derivation.kind == "word"

    @property
    def base(self) -> "Metric":
        if self.is_word:
            return self
        return Metric(self.gens, WORD, self._engine.budget)

    @property
    def fingerprint(self) -> str:
        return f"{self.gens.fingerprint}#{self.derivation}"

    def word_length(self, g: Element) -> Fraction:
        return Fraction(self._engine.word_length(g), self.gens.scale)

    def length(self, g: Element) -> Number:
        return self.derivation.apply(self.word_length(g))

    def distance(self, x: Element, y: Element) -> Number:
        return self.length(self.group.multiply(self.group.invert(x), y))

    def geodesic(self, g: Element, start: Element = IDENTITY) -> Path:
        """A word geodesic from ``start`` to ``start * g`` (word metrics only)."""
        if not self.is_word:
            raise NonWordMetric(f"{self.name} has no step geodesics")
        d, (pts, labs) = self._engine.astar(g, want_path=True)
        if start:
            pts = [self.group.multiply(start, p) for p in pts]
        return Path(pts, labs, Fraction(d, self.gens.scale))

    def ball(self, radius) -> "Ball":
        return enumerate_ball(self, radius)

    def __repr__(self):
        return f"Metric({self.name}: {self.fingerprint})"


def build_metric(group: GroupSpec, gens: GeneratingSet, derivation: Derivation = WORD, *,
                 check_generation: bool = True, name: str = "", budget: int = DEFAULT_BUDGET,
                 generation_budget: int = 20_000) -> Metric:
    """Construct a metric, checking heuristically that ``gens`` generates.

    The check runs a bounded exact search for every standard generator; a
    search that runs out of budget is reported as non-generating.
    """
    if gens.group != group:
        raise ValueError("generating set belongs to another group")
    m = Metric(gens, derivation, budget, name)
    if check_generation:
        for label, s in group.standard_generators():
            try:
                m._engine.astar(s, budget=generation_budget)
            except OutOfBall:
                raise NotGenerating(f"standard generator {label} not reached") from None
    return m


# ---- balls -------------------------------------------------------------------


class Ball:
    """All elements within ``radius`` of the identity, with exact distances.

    A ball is a read-only view of the engine's settled region; balls of the
    same generating set at different radii share storage, so they agree on
    common elements by construction.
    """

    def __init__(self, metric: Metric, radius):
        self.metric = metric
        self.radius = Fraction(radius)
        eng = metric._engine
        self._engine = eng
        self.base_radius = metric.derivation.base_radius(self.radius, eng.scale)
        r_scaled = math.floor(self.base_radius * eng.scale)
        eng.grow(r_scaled)
        self._r_scaled = r_scaled
        # settled order is by level, so the ball is a prefix
        cut = 0
        for level, end in eng.level_end.items():
            if level <= r_scaled:
                cut = max(cut, end)
        self._size = cut
        if not metric.is_word:
            f = metric.derivation.apply
            sc = eng.scale
            self._size = sum(
                1 for v in eng.order[:cut] if f(Fraction(eng.dist[v], sc)) <= self.radius
            )

    @property
    def group(self):
        return self.metric.group

    def __len__(self):
        return self._size

    def __contains__(self, g):
        d = self._engine.dist.get(g)
        if d is None or d > self._r_scaled:
            return False
        if self.metric.is_word:
            return True
        return self.metric.derivation.apply(Fraction(d, self._engine.scale)) <= self.radius

    def elements(self) -> list:
        """Elements in increasing distance, ties in discovery order."""
        eng = self._engine
        if self.metric.is_word:
            return eng.order[: self._size]
        return [v for v in eng.order if v in self]

    def __iter__(self) -> Iterator:
        return iter(self.elements())

    def keys(self) -> list[str]:
        k = self.group.key
        return [k(v) for v in self.elements()]

    def word_distance(self, g) -> Fraction:
        if g not in self:
            raise OutOfBall(g, "radius", f"not within radius {format_number(self.radius)}")
        return Fraction(self._engine.dist[g], self._engine.scale)

    def distance(self, g, h=None) -> Number:
        """``d(1, g)``, or ``d(g, h)`` when two elements are given (both via lookup)."""
        if h is not None:
            g = self.group.multiply(self.group.invert(g), h)
        return self.metric.derivation.apply(self.word_distance(g))

    def predecessor(self, g) -> str | None:
        if g not in self:
            raise OutOfBall(g)
        i = self._engine.pred[g]
        return None if i < 0 else self.metric.gens.labels[i]

    def geodesic(self, g) -> Path:
        if not self.metric.is_word:
            raise NonWordMetric(f"{self.metric.name} has no step geodesics")
        if g not in self:
            raise OutOfBall(g)
        pts, labs = self._engine._ball_path(g)
        return Path(pts, labs, self.word_distance(g))

    def shell(self, r) -> list:
        """Elements at word distance exactly ``r``."""
        eng = self._engine
        target = Fraction(r) * eng.scale
        return [v for v in self.elements() if eng.dist[v] == target]

    def all_geodesics(self, g, limit: int = 64) -> list[Path]:
        """Up to ``limit`` distinct word geodesics 1 -> g, all inside the ball."""
        if not self.metric.is_word:
            raise NonWordMetric(self.metric.name)
        eng = self._engine
        gens = self.metric.gens
        grp = self.group
        out: list[Path] = []

        def back(h, pts, labs):
            if len(out) >= limit:
                return
            if not h:
                out.append(Path(list(reversed(pts)), list(reversed(labs)), self.word_distance(g)))
                return
            dh = eng.dist[h]
            for i, s in enumerate(gens.elements):
                prev = grp.multiply(h, grp.invert(s))
                dp = eng.dist.get(prev)
                if dp is not None and dp + eng.w[i] == dh:
                    back(prev, pts + [prev], labs + [gens.labels[i]])

        if g not in self:
            raise OutOfBall(g)
        back(g, [g], [])
        return out

    @property
    def fingerprint(self) -> str:
        return self.metric.fingerprint


def enumerate_ball(metric: Metric, radius) -> Ball:
    """Exact ball of the given radius; raises BudgetExceeded if it is too large."""
    if Fraction(radius) < 0:
        raise ValueError("radius must be non-negative")
    return Ball(metric, radius)


# ---- coarse geodesicity ----------------------------------------------------


@dataclass
class CoarseGeodesicReport:
    C: Fraction
    checked: int
    verified: int
    failures: list = field(default_factory=list)  # (element key, word distance, best constant)
    inconclusive: int = 0

    @property
    def fraction_verified(self) -> float:
        return self.verified / self.checked if self.checked else 1.0

    @property
    def passed(self) -> bool:
        return not self.failures and not self.inconclusive


def chain_feasible(dist_matrix, C) -> bool:
    """Do times ``t_0 <= ... <= t_m`` exist with ``|t_j - t_i - d_ij| <= C``?

    The constraints are difference constraints; they are feasible iff the
    constraint graph has no negative cycle (Floyd-Warshall, exact arithmetic).
    """
    m = len(dist_matrix)
    inf = None
    # edge u->v with weight c encodes t_v - t_u <= c
    D = [[inf] * m for _ in range(m)]
    for i in range(m):
        D[i][i] = 0
    for i in range(m):
        for j in range(i + 1, m):
            d = dist_matrix[i][j]
            up, lo = d + C, d - C
            if lo < 0:
                lo = 0
            D[i][j] = up if D[i][j] is None or up < D[i][j] else D[i][j]
            D[j][i] = -lo if D[j][i] is None or -lo < D[j][i] else D[j][i]
    for k in range(m):
        Dk = D[k]
        for i in range(m):
            dik = D[i][k]
            if dik is None:
                continue
            Di = D[i]
            for j in range(m):
                dkj = Dk[j]
                if dkj is None:
                    continue
                s = dik + dkj
                if Di[j] is None or s < Di[j]:
                    Di[j] = s
            if Di[i] < 0:
                return False
    return all(D[i][i] >= 0 for i in range(m))


def _float_feasible(mat, C: float) -> bool:
    m = len(mat)
    D = [[0.0] * m for _ in range(m)]
    for i in range(m):
        for j in range(i + 1, m):
            D[i][j] = mat[i][j] + C
            D[j][i] = -max(mat[i][j] - C, 0.0)
    for k in range(m):
        Dk = D[k]
        for i in range(m):
            Di = D[i]
            dik = Di[k]
            for j in range(m):
                s = dik + Dk[j]
                if s < Di[j]:
                    Di[j] = s
            if Di[i] < -1e-12:
                return False
    return True


def minimal_chain_constant(dist_matrix, tol: float = 1e-3) -> float:
    """Smallest C (to ``tol``, floating point) making the chain feasible."""
    mat = [[float(x) for x in row] for row in dist_matrix]
    if _float_feasible(mat, 0.0):
        return 0.0
    lo, hi = 0.0, max((max(r) for r in mat), default=0.0) + 1.0
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if _float_feasible(mat, mid):
            hi = mid
        else:
            lo = mid
    return hi


def sample_by_length(metric: Metric, lengths: Sequence, per_length: int, seed: int) -> list:
    """Elements with prescribed word lengths, cut from geodesics of random walks."""
    base = metric.base
    grp = metric.group
    rng = random.Random(seed)
    out, seen = [], set()
    wmax = max(base.gens.weights)
    for L in lengths:
        L = Fraction(L)
        got = tries = 0
        while got < per_length and tries < 40 * per_length:
            tries += 1
            g = grp.random_element(rng, int(3 * L / min(base.gens.weights)) + 2)
            if base.word_length(g) < L:
                continue
            path = base.geodesic(g)
            acc = Fraction(0)
            cut = None
            for i, lab in enumerate(path.labels):
                acc += base.gens.weight(lab)
                if acc >= L:
                    cut = path.points[i + 1]
                    break
            if cut is None or cut in seen or base.word_length(cut) > L + wmax:
                continue
            seen.add(cut)
            out.append(cut)
            got += 1
    return out


def check_coarse_geodesic(metric: Metric, C, radius=None, *, elements: Sequence | None = None,
                          samples: int = 20, seed: int = 0, max_alternatives: int = 4) -> CoarseGeodesicReport:
    """Search for discrete C-coarse geodesic chains from 1 to sampled elements.

    Chains are the vertex sequences of word geodesics for the underlying
    generating set (the greedy certificate); when the base ball is already
    enumerated far enough, up to ``max_alternatives`` geodesics are tried.
    Left invariance reduces every pair (x, y) to (1, x^-1 y).  Without explicit
    ``elements``, samples are stratified over word lengths from ``radius/2`` up
    to the largest word length inside the metric ball of ``radius``.
    A pair for which no geodesic could be computed counts as inconclusive.
    """
    C = Fraction(C)
    if radius is not None and Fraction(radius) < 2 * C:
        raise ValueError("radius must be at least 2C")
    grp = metric.group
    base = metric.base
    if elements is None:
        if radius is None:
            raise ValueError("need radius or elements")
        top = metric.derivation.base_radius(Fraction(radius), base.gens.scale)
        k = max(1, samples // 4)
        lengths = sorted({top, top * 3 / 4, top * 2 / 3, top / 2}, reverse=True)
        elements = sample_by_length(metric, lengths, k, seed)
    report = CoarseGeodesicReport(C, 0, 0)
    for g in elements:
        report.checked += 1
        try:
            paths = [base.geodesic(g)]
        except OutOfBall:
            report.inconclusive += 1
            continue
        wl = base.word_length(g)
        if max_alternatives > 1 and wl * base.gens.scale <= base._engine.completed:
            paths = Ball(base, wl).all_geodesics(g, max_alternatives) or paths
        ok = False
        best = None
        for p in paths:
            pts = p.points
            n = len(pts)
            mat = [[0] * n for _ in range(n)]
            for i in range(n):
                for j in range(i + 1, n):
                    mat[i][j] = mat[j][i] = metric.distance(pts[i], pts[j])
            if chain_feasible(mat, C):
                ok = True
                break
            c_min = minimal_chain_constant(mat)
            best = c_min if best is None else min(best, c_min)
        if ok:
            report.verified += 1
        else:
            report.failures.append((grp.key(g), wl, best))
    return report


# ---- ball cache --------------------------------------------------------------


def _cache_name(metric: Metric, radius) -> str:
    import hashlib

    h = hashlib.sha256(metric.gens.fingerprint.encode()).hexdigest()[:16]
    r = format_number(Fraction(radius)).replace("/", "_")
    return f"ball-{h}-r{r}.tsv"


def save_ball(ball: Ball, directory: str) -> str:
    """Write the base word-metric ball; existing files are never rewritten."""
    base = ball.metric.base
    radius = ball.base_radius
    path = os.path.join(directory, _cache_name(base, radius))
    if os.path.exists(path):
        return path
    os.makedirs(directory, exist_ok=True)
    b = Ball(base, radius)
    eng = base._engine
    grp = base.group
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"group={grp.canonical_text}\n")
        fh.write(f"metric={base.gens.fingerprint}\n")
        fh.write(f"radius={format_number(radius)}\n")
        for v in b.elements():
            d = Fraction(eng.dist[v], eng.scale)
            i = eng.pred[v]
            lab = "-" if i < 0 else base.gens.labels[i]
            fh.write(f"{grp.key(v)}\t{d.numerator}/{d.denominator}\t{lab}\n")
    os.replace(tmp, path)
    return path


def _validate_cached(eng, base: Metric, path: str, dist: dict, pred: dict, top: int):
    """Structural checks: 1 at 0, all within the radius, each entry one weighted step past its predecessor."""
    grp = base.group
    if dist.get(IDENTITY) != 0:
        raise CacheMismatch(f"cache {path} does not place the identity at distance 0")
    mul, inv = grp.multiply, grp.invert
    for v, d in dist.items():
        if d > top:
            raise CacheMismatch(f"cache {path} lists {grp.key(v)} beyond the radius")
        i = pred[v]
        if v == IDENTITY:
            continue
        if i < 0:
            raise CacheMismatch(f"cache {path} gives {grp.key(v)} no predecessor")
        u = mul(v, inv(base.gens.elements[i]))
        if dist.get(u) != d - eng.w[i]:
            raise CacheMismatch(f"cache {path} breaks the predecessor chain at {grp.key(v)}")


def load_ball(metric: Metric, directory: str, radius) -> Ball | None:
    """Load a cached ball into the metric's engine; ``None`` if not cached.

    Raises CacheMismatch when the header does not match the metric.
    """
    base = metric.base
    rb = metric.derivation.base_radius(Fraction(radius), base.gens.scale)
    path = os.path.join(directory, _cache_name(base, rb))
    if not os.path.exists(path):
        return None
    grp = base.group
    eng = base._engine
    with open(path, encoding="utf-8") as fh:
        header = [fh.readline().rstrip("\n") for _ in range(3)]
        expect = [f"group={grp.canonical_text}", f"metric={base.gens.fingerprint}",
                  f"radius={format_number(rb)}"]
        if header != expect:
            raise CacheMismatch(f"cache {path} header {header} does not match {expect}")
        dist, pred, order = {}, {}, []
        level_end = {}
        for line in fh:
            key, frac, lab = line.rstrip("\n").split("\t")
            v = grp.parse_key(key)
            d = Fraction(frac) * eng.scale
            if d.denominator != 1:
                raise CacheMismatch(f"distance {frac} not a multiple of the weight grid")
            d = int(d)
            dist[v] = d
            pred[v] = -1 if lab == "-" else base.gens.index[lab]
            order.append(v)
            level_end[d] = len(order)
    _validate_cached(eng, base, path, dist, pred, math.floor(rb * eng.scale))
    if eng._started or eng.loaded_from_cache:
        # the engine already knows part of this ball: the file must agree with it
        for v, d in dist.items():
            known = eng.dist.get(v) if eng.dist.get(v, eng.completed + 1) <= eng.completed else eng.memo.get(v)
            if known is not None and known != d:
                raise CacheMismatch(f"cache {path} disagrees with settled distance of {grp.key(v)}")
        return Ball(metric, radius)
    eng.dist, eng.pred, eng.order, eng.level_end = dist, pred, order, level_end
    eng.completed = math.floor(rb * eng.scale)
    eng.loaded_from_cache = True
    eng._started = True
    eng._buckets = {}
    eng._tent = {}
    # the frontier is rebuilt so the ball can be extended later
    for v in order:
        if eng.dist[v] + max(eng.w) > eng.completed:
            _refrontier(eng, v)
    for v, d in dist.items():
        eng.memo.setdefault(v, d)
    return Ball(metric, radius)


def _refrontier(eng: _Engine, u: Element):
    mul = eng.group.multiply
    du = eng.dist[u]
    for i, s in enumerate(eng.gens.elements):
        v = mul(u, s)
        if v in eng.dist:
            continue
        nd = du + eng.w[i]
        old = eng._tent.get(v)
        if old is None or nd < old:
            eng._tent[v] = nd
            eng.pred[v] = i
            eng._buckets.setdefault(nd, []).append(v)


def audit_ball(ball: Ball, fraction: float = 0.01, seed: int = 0) -> tuple[int, int]:
    """Recompute a sample of ball distances with an independent search.

    Returns ``(checked, mismatches)``.  The sample always has at least one
    element besides the identity when the ball has one.
    """
    base = ball.metric.base
    elems = ball.elements()
    rng = random.Random(seed)
    k = max(1, math.ceil(fraction * len(elems)))
    sample = rng.sample(elems, min(k, len(elems)))
    fresh = _Engine(base.gens, ASTAR_BUDGET)
    fresh._lam = base._engine.lam()
    bad = 0
    for v in sample:
        d, _ = fresh.astar(v)
        if Fraction(d, fresh.scale) != ball.word_distance(v):
            bad += 1
    return len(sample), bad
