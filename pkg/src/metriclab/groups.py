"""Concrete groups built from Z^n, F(k) and H3 by direct and free products.

Elements are stored in a canonical normal form so that equality, hashing and
the text key all agree.  An element is a tuple of syllables
``(factor_index, payload)``; ``payload`` holds one value per atom of the factor:

* ``Z^n``: a tuple of ``n`` ints,
* ``F(k)``: a freely reduced tuple of nonzero ints (``i`` is the ``i``-th basis
  letter, ``-i`` its inverse),
* ``H3``: ``(a, b, c)`` with law ``(a,b,c)(a',b',c') = (a+a', b+b', c+c'+ab')``.

Adjacent syllables lie in distinct factors and no syllable is trivial.  Groups
without a free product have a single factor, so the same layout covers them.

Key format (stable): ``e`` for the identity, otherwise syllables joined by
``|``; a syllable is ``<factor>:<atom>;<atom>...`` and an atom is its integers
joined by ``,``.
"""

from __future__ import annotations

import math
import random
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import ElementError, GroupSpecSyntaxError, UnsupportedNesting

Payload = tuple
Syllable = tuple[int, Payload]
Element = tuple
Word = tuple  # sequence of (generator label, +1 | -1)

IDENTITY: Element = ()

_FREE_LETTERS = "abcdghijklmnopqrs"
_RANK_ONE_LETTERS = "tuvw"


@dataclass(frozen=True)
class Atom:
    kind: str  # "Z", "F" or "H3"
    rank: int

    def __str__(self):
        if self.kind == "Z":
            return f"Z^{self.rank}"
        if self.kind == "F":
            return f"F({self.rank})"
        return "H3"


# ---- atom arithmetic -------------------------------------------------------


def _z_mul(x, y):
    return tuple(a + b for a, b in zip(x, y))


def _z_inv(x):
    return tuple(-a for a in x)


def _f_mul(x, y):
    i = 0
    n = min(len(x), len(y))
    lx = len(x)
    while i < n and x[lx - 1 - i] == -y[i]:
        i += 1
    if i == 0:
        return x + y
    return x[: lx - i] + y[i:]


def _f_inv(x):
    return tuple(-a for a in reversed(x))


def _h_mul(x, y):
    return (x[0] + y[0], x[1] + y[1], x[2] + y[2] + x[0] * y[1])


def _h_inv(x):
    a, b, c = x
    return (-a, -b, -c + a * b)


_MUL = {"Z": _z_mul, "F": _f_mul, "H3": _h_mul}
_INV = {"Z": _z_inv, "F": _f_inv, "H3": _h_inv}


def _atom_identity(atom: Atom):
    if atom.kind == "Z":
        return (0,) * atom.rank
    if atom.kind == "F":
        return ()
    return (0, 0, 0)


def _atom_is_identity(atom: Atom, value) -> bool:
    return not any(value)


def _isqrt_ceil(n: int) -> int:
    r = math.isqrt(n)
    return r if r * r == n else r + 1


# ---- parsing ---------------------------------------------------------------


class _Parser:
    """Recursive descent for ``expr := term ('*' term)*; term := prim ('x' prim)*``."""

    _TOKEN = re.compile(r"\s*(?:(Z)\s*(?:\^\s*(\d+))?|(F)\s*\(\s*(\d+)\s*\)|(H3)|([*∗])|([x×])|(\()|(\)))")

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def _skip(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def _peek(self) -> str:
        self._skip()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def parse(self) -> list[list[Atom]]:
        factors = self._expr()
        self._skip()
        if self.pos != len(self.text):
            raise GroupSpecSyntaxError(f"unexpected {self.text[self.pos]!r}", self.pos)
        return factors

    def _expr(self) -> list[list[Atom]]:
        factors = self._term()
        while self._peek() in ("*", "∗"):
            self.pos += 1
            factors += self._term()
        return factors

    def _term(self) -> list[list[Atom]]:
        start = self._peek() and self.pos
        parts = [self._prim()]
        while self._peek() in ("x", "×"):
            self.pos += 1
            parts.append(self._prim())
        if len(parts) == 1:
            return parts[0]
        atoms: list[Atom] = []
        for p in parts:
            if len(p) > 1:
                raise UnsupportedNesting("free product inside a direct product", start)
            atoms += p[0]
        return [atoms]

    def _prim(self) -> list[list[Atom]]:
        self._skip()
        if self._peek() == "(":
            self.pos += 1
            inner = self._expr()
            if self._peek() != ")":
                raise GroupSpecSyntaxError("expected ')'", self.pos)
            self.pos += 1
            return inner
        m = self._TOKEN.match(self.text, self.pos)
        if not m or not (m.group(1) or m.group(3) or m.group(5)):
            raise GroupSpecSyntaxError("expected Z^n, F(k) or H3", self.pos)
        at = self.pos
        self.pos = m.end()
        if m.group(1):
            n = int(m.group(2)) if m.group(2) else 1
            if n < 1:
                raise GroupSpecSyntaxError("rank must be positive", at)
            return [[Atom("Z", n)]]
        if m.group(3):
            k = int(m.group(4))
            if k < 1:
                raise GroupSpecSyntaxError("rank must be positive", at)
            return [[Atom("F", k)]]
        return [[Atom("H3", 3)]]


# ---- the group ---------------------------------------------------------------


@dataclass(frozen=True)
class GroupSpec:
    """A group presented as a free product of direct products of atoms."""

    factors: tuple[tuple[Atom, ...], ...]
    rank_one_peripheral: bool = False
    text: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.factors or any(not f for f in self.factors):
            raise ValueError("empty factor")
        for f in self.factors:
            for a in f:
                if a.rank < 1:
                    raise ValueError("atom rank must be positive")
        object.__setattr__(self, "_mul", [[_MUL[a.kind] for a in f] for f in self.factors])
        object.__setattr__(self, "_inv", [[_INV[a.kind] for a in f] for f in self.factors])

    # -- structure --

    @property
    def is_free_product(self) -> bool:
        return len(self.factors) > 1

    def factor_is_free_abelian(self, i: int) -> bool:
        return all(a.kind == "Z" for a in self.factors[i])

    def factor_rank(self, i: int) -> int:
        return sum(a.rank for a in self.factors[i])

    @property
    def peripherals(self) -> tuple[int, ...]:
        if not self.is_free_product:
            return ()
        out = []
        for i in range(len(self.factors)):
            if self.factor_is_free_abelian(i):
                r = self.factor_rank(i)
                if r >= 2 or self.rank_one_peripheral:
                    out.append(i)
        return tuple(out)

    @property
    def is_toral_rel_hyp(self) -> bool:
        for f in self.factors:
            kinds = {a.kind for a in f}
            if "H3" in kinds:
                return False
            if "F" in kinds and len(f) > 1:
                return False
        return True

    @property
    def canonical_text(self) -> str:
        return " * ".join(" x ".join(str(a) for a in f) for f in self.factors)

    def __str__(self):
        return self.canonical_text

    # -- group law --

    def identity(self) -> Element:
        return IDENTITY

    def factor_identity(self, i: int) -> Payload:
        return tuple(_atom_identity(a) for a in self.factors[i])

    def _payload_trivial(self, payload) -> bool:
        for v in payload:
            if any(v):
                return False
        return True

    def multiply(self, a: Element, b: Element) -> Element:
        if not a:
            return b
        if not b:
            return a
        out = list(a)
        for f, p in b:
            if out and out[-1][0] == f:
                q = out[-1][1]
                muls = self._mul[f]
                if len(muls) == 1:
                    merged = (muls[0](q[0], p[0]),)
                else:
                    merged = tuple(m(x, y) for m, x, y in zip(muls, q, p))
                if self._payload_trivial(merged):
                    out.pop()
                else:
                    out[-1] = (f, merged)
            else:
                out.append((f, p))
        return tuple(out)

    def invert(self, a: Element) -> Element:
        return tuple(
            (f, tuple(inv(v) for inv, v in zip(self._inv[f], p))) for f, p in reversed(a)
        )

    def power(self, a: Element, n: int) -> Element:
        if n < 0:
            a, n = self.invert(a), -n
        result, base = IDENTITY, a
        while n:
            if n & 1:
                result = self.multiply(result, base)
            n >>= 1
            if n:
                base = self.multiply(base, base)
        return result

    def conjugate(self, h: Element, g: Element) -> Element:
        return self.multiply(self.multiply(h, g), self.invert(h))

    def syllable(self, factor: int, *atom_values) -> Element:
        """Element with a single syllable in ``factor`` (identity if trivial)."""
        payload = tuple(tuple(v) for v in atom_values)
        if len(payload) != len(self.factors[factor]):
            raise ElementError("wrong number of atom values for factor")
        payload = tuple(self._reduce_atom(a, v) for a, v in zip(self.factors[factor], payload))
        return () if self._payload_trivial(payload) else ((factor, payload),)

    @staticmethod
    def _reduce_atom(atom: Atom, value):
        if atom.kind == "F":
            return _f_mul((), tuple(value))
        return tuple(value)

    def validate(self, a: Element) -> None:
        """Raise ElementError unless ``a`` is a valid normal form."""
        if not isinstance(a, tuple):
            raise ElementError("element must be a tuple of syllables")
        prev = None
        for syl in a:
            if not (isinstance(syl, tuple) and len(syl) == 2):
                raise ElementError("syllable must be (factor, payload)")
            f, p = syl
            if not (0 <= f < len(self.factors)):
                raise ElementError(f"factor {f} out of range")
            if f == prev:
                raise ElementError("adjacent syllables in the same factor")
            prev = f
            atoms = self.factors[f]
            if len(p) != len(atoms):
                raise ElementError("payload length mismatch")
            for atom, v in zip(atoms, p):
                if atom.kind == "Z" and len(v) != atom.rank:
                    raise ElementError("free abelian coordinate count mismatch")
                if atom.kind == "H3" and len(v) != 3:
                    raise ElementError("Heisenberg element needs three coordinates")
                if atom.kind == "F":
                    if any(x == 0 or abs(x) > atom.rank for x in v):
                        raise ElementError("free letter out of range")
                    if any(v[i] == -v[i + 1] for i in range(len(v) - 1)):
                        raise ElementError("free word not reduced")
            if self._payload_trivial(p):
                raise ElementError("trivial syllable")

    # -- keys --

    def key(self, a: Element) -> str:
        if not a:
            return "e"
        return "|".join(
            f"{f}:" + ";".join(",".join(str(x) for x in v) for v in p) for f, p in a
        )

    def parse_key(self, text: str) -> Element:
        text = text.strip()
        if text == "e":
            return IDENTITY
        out = []
        try:
            for part in text.split("|"):
                f_txt, rest = part.split(":", 1)
                f = int(f_txt)
                atoms = rest.split(";")
                payload = tuple(
                    tuple(int(x) for x in s.split(",")) if s else () for s in atoms
                )
                out.append((f, payload))
        except ValueError as exc:
            raise ElementError(f"malformed element key {text!r}") from exc
        el = tuple(out)
        self.validate(el)
        return el

    # -- standard generators and words --

    def standard_generators(self) -> list[tuple[str, Element]]:
        """Labelled standard generators (one per basis direction, no inverses)."""
        gens: list[tuple[str, Element]] = []
        free_i = rank1_i = 0
        e_i = 1
        h_i = 0
        for f, atoms in enumerate(self.factors):
            for j, atom in enumerate(atoms):
                def single(value, f=f, j=j, atoms=atoms):
                    vals = [_atom_identity(a) for a in atoms]
                    vals[j] = value
                    return ((f, tuple(vals)),)

                if atom.kind == "F":
                    for letter in range(1, atom.rank + 1):
                        gens.append((_FREE_LETTERS[free_i], single((letter,))))
                        free_i += 1
                elif atom.kind == "H3":
                    suffix = "" if h_i == 0 else str(h_i + 1)
                    gens.append(("x" + suffix, single((1, 0, 0))))
                    gens.append(("y" + suffix, single((0, 1, 0))))
                    h_i += 1
                elif atom.rank == 1:
                    gens.append((_RANK_ONE_LETTERS[rank1_i], single((1,))))
                    rank1_i += 1
                else:
                    for k in range(atom.rank):
                        v = [0] * atom.rank
                        v[k] = 1
                        gens.append((f"e{e_i}", single(tuple(v))))
                        e_i += 1
        return gens

    def parse_element(self, text: str, labels: Mapping[str, Element] | None = None) -> Element:
        """Evaluate a word like ``"a b a^-1"`` or ``"e1^3 t"``; ``1`` is the identity."""
        table = dict(self.standard_generators())
        if labels:
            table.update(labels)
        out = IDENTITY
        for tok in text.replace("*", " ").replace(".", " ").split():
            if tok in ("1", "e"):
                continue
            name, _, exp = tok.partition("^")
            if name not in table:
                raise ElementError(f"unknown generator {name!r}")
            try:
                k = int(exp) if exp else 1
            except ValueError as exc:
                raise ElementError(f"bad exponent in {tok!r}") from exc
            out = self.multiply(out, self.power(table[name], k))
        return out

    def evaluate_word(self, gens: Mapping[str, Element], word: Sequence[tuple[str, int]]) -> Element:
        out = IDENTITY
        for label, eps in word:
            if label not in gens:
                raise ElementError(f"unknown generator {label!r}")
            if eps not in (1, -1):
                raise ElementError("word exponents must be +1 or -1")
            g = gens[label]
            out = self.multiply(out, g if eps == 1 else self.invert(g))
        return out

    def std_length_lower_bound(self, a: Element) -> int:
        """Lower bound for the word length in the standard generators.

        Exact for free, free abelian and free product syllables.  For H3 a
        path of length L ending at (a, b) closes up with |a|+|b| more steps
        into a loop whose signed area is c (or c - ab, closing the other way),
        and a lattice loop of perimeter P bounds area at most P^2/16.
        """
        total = 0
        for f, p in a:
            for atom, v in zip(self.factors[f], p):
                if atom.kind == "H3":
                    x, y, c = v
                    ab = abs(x) + abs(y)
                    area = max(abs(c), abs(c - x * y))
                    bound = max(ab, _isqrt_ceil(16 * area) - ab)
                    if (bound - ab) % 2:
                        bound += 1
                    total += bound
                elif atom.kind == "F":
                    total += len(v)
                else:
                    total += sum(abs(x) for x in v)
        return total

    # -- random sampling (tests and experiments) --

    def random_element(self, rng: random.Random, length: int) -> Element:
        gens = [g for _, g in self.standard_generators()]
        out = IDENTITY
        for _ in range(length):
            g = rng.choice(gens)
            out = self.multiply(out, g if rng.random() < 0.5 else self.invert(g))
        return out


def parse_group_spec(text: str, rank_one_peripheral: bool = False) -> GroupSpec:
    """Parse ``Z^n``, ``F(k)``, ``H3`` combined with ``x`` (direct) and ``*`` (free)."""
    if not text or not text.strip():
        raise GroupSpecSyntaxError("empty group spec", 0)
    factors = _Parser(text).parse()
    return GroupSpec(
        tuple(tuple(f) for f in factors), rank_one_peripheral=rank_one_peripheral, text=text.strip()
    )


def cyclic_reduce(group: GroupSpec, a: Element) -> tuple[Element, Element]:
    """Split a free-group element as ``conjugator * core * conjugator^-1``."""
    if len(group.factors) != 1 or len(group.factors[0]) != 1 or group.factors[0][0].kind != "F":
        raise ValueError("cyclic_reduce needs a free group F(k)")
    w = a[0][1][0] if a else ()
    i = 0
    while 2 * i + 1 < len(w) and w[i] == -w[len(w) - 1 - i]:
        i += 1
    conj, core = w[:i], w[i : len(w) - i]
    wrap = lambda x: ((0, (x,)),) if x else IDENTITY  # noqa: E731
    return wrap(core), wrap(conj)


def free_word(*letters: int) -> Element:
    """Element of a single free atom from signed letters (reduced on the way)."""
    return ((0, (_f_mul((), tuple(letters)),)),) if _f_mul((), tuple(letters)) else IDENTITY


def elements_from_keys(group: GroupSpec, keys: Iterable[str]) -> list[Element]:
    return [group.parse_key(k) for k in keys]
