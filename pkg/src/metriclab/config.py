"""INI experiment configuration.

A config has one ``[experiment]`` section, one ``[metric <id>]`` section per
metric and optional ``[pair <id>]`` sections::

    [experiment]
    group = F(2)
    seed = 7
    radii = 4, 6, 8, 10, 12
    elements = a; b; a b

    [metric std]
    generators = standard

    [metric abc]
    generators = a: a; b: b; c: a b @ 1
    derivation = word

    [pair main]
    metrics = std, abc

Generator lists are ``label: word [@ weight]`` entries separated by ``;``
with words over the standard labels of the group, or ``standard`` optionally
followed by ``+`` and such entries.  Derivations are ``word``,
``additive(c)`` and ``concave``.
"""

from __future__ import annotations

import configparser
import hashlib
import random
import re
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import ConfigError, MetricLabError
from .groups import GroupSpec, parse_group_spec
from .metrics import WORD, Derivation, GeneratingSet, Metric, additive, build_metric, concave
from .numbers import parse_fraction

DEFAULTS = {
    "n_max": "24",
    "samples": "2000",
    "triangle_samples": "10000",
    "delta_threshold": "",
    "witness_radius": "12",
    "witness_n": "8",
    "k_cap": "2",
    "l_cap": "4",
    "d": "1, 2",
    "rank_one_peripheral": "no",
    "output": "out",
    "ball_radius": "",
    "max_excursion": "",
    "elements": "",
}


@dataclass
class MetricDef:
    id: str
    generators: str
    derivation: Derivation
    metric: Metric | None = None


@dataclass
class PairDef:
    id: str
    first: str
    second: str


@dataclass
class ExperimentConfig:
    group_text: str
    group: GroupSpec
    seed: int
    radii: list
    metrics: dict
    pairs: list
    n_max: int = 24
    samples: int = 2000
    triangle_samples: int = 10_000
    delta_threshold: Fraction | None = None
    witness_radius: Fraction = Fraction(12)
    witness_n: int = 8
    K_cap: Fraction = Fraction(2)
    L_cap: Fraction = Fraction(4)
    D: list = field(default_factory=lambda: [Fraction(1), Fraction(2)])
    elements: list = field(default_factory=list)
    output: str = "out"
    ball_radius: Fraction | None = None
    max_excursion: int | None = None
    path: str = ""

    def metric(self, mid: str) -> Metric:
        return self.metrics[mid].metric

    def rng(self, name: str) -> random.Random:
        return substream(self.seed, name)

    def pair_metrics(self, pair: PairDef) -> tuple:
        return self.metric(pair.first), self.metric(pair.second)


def substream(seed: int, name: str) -> random.Random:
    """Independent generator for one named operation, derived from the config seed."""
    digest = hashlib.sha256(f"{seed}:{name}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def _line_of(text: str, section: str, key: str | None = None) -> int:
    cur = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[(.+)\]$", s)
        if m:
            cur = m.group(1).strip()
            if key is None and cur == section:
                return i
            continue
        if cur == section and key is not None and re.match(rf"{re.escape(key)}\s*[=:]", s, re.I):
            return i
    return 0


def _fail(text, section, key, msg):
    line = _line_of(text, section, key)
    where = f"[{section}]" + (f" {key}" if key else "")
    raise ConfigError(f"line {line}: {where}: {msg}")


def parse_derivation(text: str) -> Derivation:
    s = text.strip().lower()
    if s in ("word", ""):
        return WORD
    if s == "concave":
        return concave()
    m = re.fullmatch(r"additive\s*\(\s*([^)]+)\)", s)
    if m:
        c = parse_fraction(m.group(1))
        if c < 0:
            raise ValueError("additive constant must be non-negative")
        return additive(c)
    raise ValueError(f"unknown derivation {text!r}")


def parse_generators(group: GroupSpec, text: str) -> GeneratingSet:
    s = text.strip()
    extra_text = ""
    standard = False
    if s.lower().startswith("standard"):
        standard = True
        rest = s[len("standard"):].strip()
        if rest:
            if not rest.startswith("+"):
                raise ValueError("expected '+' after 'standard'")
            extra_text = rest[1:]
    else:
        extra_text = s
    items = []
    for part in extra_text.split(";"):
        part = part.strip()
        if not part:
            continue
        if ":" not in part:
            raise ValueError(f"generator entry {part!r} needs 'label: word'")
        lab, word = part.split(":", 1)
        weight = Fraction(1)
        if "@" in word:
            word, w = word.split("@", 1)
            weight = parse_fraction(w.strip())
        items.append((lab.strip(), word.strip(), weight))
    if standard:
        items = [(lab, lab, 1) for lab, _ in group.standard_generators()] + items
    if not items:
        raise ValueError("empty generating set")
    return GeneratingSet.from_words(group, items)


def _fractions(text: str) -> list:
    return [parse_fraction(x.strip()) for x in text.split(",") if x.strip()]


def load_config(path: str, build: bool = True) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text, path, build)


def parse_config(text: str, path: str = "<string>", build: bool = True) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        cp.read_string(text, source=path)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        if line is None and getattr(exc, "errors", None):
            line = exc.errors[0][0]
        raise ConfigError(f"line {line or 0}: {exc.message if hasattr(exc, 'message') else exc}") from None
    if not cp.has_section("experiment"):
        raise ConfigError("line 0: missing [experiment] section")
    ex = dict(DEFAULTS)
    ex.update(cp["experiment"])
    sec = "experiment"

    def get(key, conv, label=None):
        try:
            return conv(ex[key])
        except KeyError:
            _fail(text, sec, key, "missing")
        except (ValueError, ZeroDivisionError, MetricLabError) as exc:
            _fail(text, sec, key, str(exc) or f"bad value {ex[key]!r}")

    if "group" not in cp["experiment"]:
        _fail(text, sec, None, "missing key 'group'")
    if "seed" not in cp["experiment"]:
        _fail(text, sec, None, "missing key 'seed' (no default seed)")
    rank_one = get("rank_one_peripheral", lambda s: s.strip().lower() in ("1", "yes", "true", "on"))
    group = get("group", lambda s: parse_group_spec(s, rank_one_peripheral=rank_one))
    seed = get("seed", int)
    radii = get("radii", _fractions) if "radii" in ex else []
    if any(b <= a for a, b in zip(radii, radii[1:])):
        _fail(text, sec, "radii", "radii must be strictly increasing")
    if any(r < 0 for r in radii):
        _fail(text, sec, "radii", "radii must be non-negative")

    def positive_int(s):
        v = int(s)
        if v < 1:
            raise ValueError("must be a positive integer")
        return v

    cfg = ExperimentConfig(
        group_text=ex["group"].strip(),
        group=group,
        seed=seed,
        radii=radii,
        metrics={},
        pairs=[],
        n_max=get("n_max", positive_int),
        samples=get("samples", positive_int),
        triangle_samples=get("triangle_samples", positive_int),
        delta_threshold=get("delta_threshold", lambda s: parse_fraction(s) if s.strip() else None),
        witness_radius=get("witness_radius", parse_fraction),
        witness_n=get("witness_n", positive_int),
        K_cap=get("k_cap", parse_fraction),
        L_cap=get("l_cap", parse_fraction),
        D=get("d", _fractions),
        output=ex["output"].strip(),
        ball_radius=get("ball_radius", lambda s: parse_fraction(s) if s.strip() else None),
        max_excursion=get("max_excursion", lambda s: int(s) if s.strip() else None),
        path=path,
    )
    cfg.elements = get("elements", lambda s: [group.parse_element(w.strip())
                                                  for w in s.split(";") if w.strip()])
    for name in cp.sections():
        if name == "experiment":
            continue
        kind, _, ident = name.partition(" ")
        ident = ident.strip()
        if kind not in ("metric", "pair") or not ident:
            _fail(text, name, None, "sections must be [experiment], [metric <id>] or [pair <id>]")
        sec = name
        body = cp[name]
        if kind == "metric":
            if ident in cfg.metrics or any(p.id == ident for p in cfg.pairs):
                _fail(text, name, None, f"duplicate id {ident!r}")
            if "generators" not in body:
                _fail(text, name, None, "missing key 'generators'")
            try:
                gens = parse_generators(group, body["generators"])
            except (ValueError, MetricLabError) as exc:
                _fail(text, name, "generators", str(exc))
            try:
                der = parse_derivation(body.get("derivation", "word"))
            except (ValueError, ZeroDivisionError) as exc:
                _fail(text, name, "derivation", str(exc))
            md = MetricDef(ident, body["generators"], der)
            if build:
                try:
                    md.metric = build_metric(group, gens, der, name=ident)
                except MetricLabError as exc:
                    _fail(text, name, "generators", str(exc))
            cfg.metrics[ident] = md
        else:
            if any(p.id == ident for p in cfg.pairs) or ident in cfg.metrics:
                _fail(text, name, None, f"duplicate pair id {ident!r}")
            ids = [x.strip() for x in body.get("metrics", "").split(",") if x.strip()]
            if len(ids) != 2:
                _fail(text, name, "metrics", "a pair needs exactly two metric ids")
            cfg.pairs.append(PairDef(ident, ids[0], ids[1]))
    for p in cfg.pairs:
        for mid in (p.first, p.second):
            if mid not in cfg.metrics:
                _fail(text, f"pair {p.id}", "metrics", f"unknown metric id {mid!r}")
    if not cfg.pairs and len(cfg.metrics) >= 2:
        a, b = list(cfg.metrics)[:2]
        cfg.pairs.append(PairDef(f"{a}-{b}", a, b))
    return cfg
