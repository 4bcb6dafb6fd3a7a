"""Command-line batch runner.

    metriclab <subcommand> --config <path> [--out <dir>] [--cache <dir>]

Exit status: 0 success, 1 a reported finding failed (suite row FAIL),
2 usage, config or cache error, 3 budget or window exhausted.
"""

from __future__ import annotations

import argparse
import os
import sys
from fractions import Fraction

from .comparison import (
    MetricPair, additivity_defect_batch, coarse_equality_verdict, relative_lipschitz, summary_text,
    symmetry_violations, triangle_check,
)
from .config import ExperimentConfig, load_config
from .errors import BudgetExceeded, CacheMismatch, ConfigError, MetricLabError, OutOfBall
from .hyperbolicity import estimate_delta, fellow_travel, witness_search
from .metrics import Metric, audit_ball, enumerate_ball, load_ball, save_ball
from .numbers import format_number
from .relhyp import (
    CosetId, RelativeWindow, coset_intersection_diameter, coset_of, coset_projection, cross_validate,
    lift_relative_geodesic, relative_geodesic, table_csv,
)
from .spectrum import compare_spectra

SUBCOMMANDS = ("ball", "spectrum", "compare", "hyperbolicity", "relhyp", "witness", "suite")

EXIT_OK, EXIT_FINDING, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3


class Context:
    def __init__(self, cfg: ExperimentConfig, out: str, cache: str | None, quiet: bool):
        self.cfg = cfg
        self.out = out
        self.cache = cache
        self.quiet = quiet
        self.audits: list = []
        os.makedirs(out, exist_ok=True)
        if cache:
            os.makedirs(cache, exist_ok=True)

    def say(self, text: str):
        if not self.quiet:
            print(text)

    def write(self, name: str, text: str):
        with open(os.path.join(self.out, name), "w", encoding="utf-8", newline="") as fh:
            fh.write(text)

    def seed(self, name: str) -> int:
        return self.cfg.rng(name).randrange(2**31)

    def pairs(self):
        for p in self.cfg.pairs:
            m1, m2 = self.cfg.pair_metrics(p)
            yield p.id, MetricPair(m1, m2, p.id)

    def ball(self, mid: str, metric: Metric, radius):
        """Ball from the cache when present (audited), else enumerated and cached."""
        ball = None
        if self.cache:
            ball = load_ball(metric, self.cache, radius)
            if ball is not None:
                checked, bad = audit_ball(ball, 0.01, self.seed(f"audit:{mid}"))
                self.audits.append((mid, format_number(Fraction(radius)), checked, bad))
                if bad:
                    raise CacheMismatch(f"cache audit for {mid}: {bad} of {checked} distances differ")
        if ball is None:
            ball = enumerate_ball(metric, radius)
            if self.cache:
                save_ball(ball, self.cache)
        return ball


def _radius_for_ball(cfg: ExperimentConfig):
    if cfg.ball_radius is not None:
        return cfg.ball_radius
    if cfg.radii:
        return cfg.radii[-1]
    raise ConfigError("line 0: [experiment] needs radii or ball_radius")


# ---- subcommands ----------------------------------------------------------------


def cmd_ball(ctx: Context) -> int:
    R = _radius_for_ball(ctx.cfg)
    rows = []
    for mid, md in ctx.cfg.metrics.items():
        ball = ctx.ball(mid, md.metric, R)
        shells: dict = {}
        for g in ball.elements():
            d = ball.distance(g)
            shells[d] = shells.get(d, 0) + 1
        for d in sorted(shells):
            rows.append((mid, d, shells[d]))
        ctx.say(f"{mid}: |B({format_number(Fraction(R))})| = {len(ball)}")
    ctx.write("balls.csv", table_csv(["metric", "distance", "count"], rows))
    if ctx.audits:
        ctx.write("audit.csv", table_csv(["metric", "radius", "checked", "mismatches"], ctx.audits))
    return EXIT_OK


def cmd_spectrum(ctx: Context) -> int:
    cfg = ctx.cfg
    if not cfg.elements:
        raise ConfigError("line 0: [experiment] elements is required for spectrum")
    for pid, pair in ctx.pairs():
        cmp = compare_spectra(pair.m1, pair.m2, cfg.elements, n_max=cfg.n_max)
        ctx.write(f"spectrum-{pid}.csv", cmp.to_csv())
        wit = cfg.group.key(cmp.witness) if cmp.witness is not None else "-"
        ctx.write(f"spectrum-{pid}.txt", summary_text({"pair": pid, "verdict": cmp.verdict, "witness": wit}))
        ctx.say(f"{pid}: {cmp.verdict} (witness {wit})")
    return EXIT_OK


def cmd_compare(ctx: Context) -> int:
    cfg = ctx.cfg
    if len(cfg.radii) < 3:
        raise ConfigError("line 0: [experiment] radii needs at least three values for compare")
    r_lemma = cfg.radii[len(cfg.radii) // 2]
    for pid, pair in ctx.pairs():
        rep = coarse_equality_verdict(pair, cfg.radii)
        ctx.write(f"delta-{pid}.csv", rep.to_csv())
        tri = triangle_check(pair, cfg.triangle_samples, ctx.seed(f"triangle:{pid}"), r_lemma)
        add = additivity_defect_batch(pair, 50, ctx.seed(f"additivity:{pid}"), r_lemma)
        sym = symmetry_violations(pair, pair.sample(r_lemma, 200, cfg.rng(f"symmetry:{pid}")))
        items = {
            "pair": pid, "verdict": rep.verdict, "max_abs": ",".join(format_number(m) for m in rep.max_abs),
            "slope": f"{rep.slope:.6g}", "shape": rep.shape or "-",
            "triangle_checked": tri.checked, "triangle_violations": tri.count,
            "additivity_max_defect": add.max_defect, "symmetry_violations": sym,
        }
        if rep.constant is not None:
            items["constant"] = rep.constant
        if cfg.group.peripherals:
            lip = relative_lipschitz(pair, cfg.samples, ctx.seed(f"lipschitz:{pid}"), r_lemma)
            items["relative_lipschitz"] = lip.P_hat
        ctx.write(f"lemmas-{pid}.txt", summary_text(items))
        ctx.say(f"{pid}: {rep.verdict} max|Δ| = {items['max_abs']}")
    return EXIT_OK


def cmd_hyperbolicity(ctx: Context) -> int:
    cfg = ctx.cfg
    rows = []
    # δ̂ windows stop at the ball radius (the largest radius, unless ball_radius caps it)
    top = _radius_for_ball(cfg)
    radii = [r for r in cfg.radii if r <= top] or [top]
    for mid, md in cfg.metrics.items():
        for r in radii:
            ball = ctx.ball(mid, md.metric, r)
            # surd distances (concave derivation) only admit the sampled estimate
            if len(ball) ** 2 <= 250_000 and md.metric.derivation.kind != "concave":
                est = estimate_delta(ball)
            else:
                est = estimate_delta(ball, samples=cfg.samples, seed=ctx.seed(f"delta:{mid}:{r}"))
            rows.append((mid, r, est.points, est.mode, est.delta))
            ctx.say(f"{mid} r={format_number(r)}: δ̂ = {format_number(est.delta)} ({est.mode})")
    ctx.write("delta-hat.csv", table_csv(["metric", "radius", "points", "mode", "delta"], rows))
    r_ft = cfg.radii[len(cfg.radii) // 2] if cfg.radii else Fraction(6)
    for pid, pair in ctx.pairs():
        rel = bool(cfg.group.peripherals)
        rep = fellow_travel(pair, samples=min(cfg.samples, 60), seed=ctx.seed(f"fellow:{pid}"),
                            radius=r_ft, relative=rel, max_excursion=cfg.max_excursion)
        ctx.write(f"fellow-{pid}.csv", table_csv(["endpoint", "h12", "h21", "excluded"], rep.rows))
        if rel:
            ctx.write(f"excursions-{pid}.csv", table_csv(["endpoint", "side", "start", "length"], rep.segments))
        ctx.say(f"{pid}: C_fellow = {format_number(rep.C_fellow)} (excluded {rep.excluded})")
    return EXIT_OK


def cmd_relhyp(ctx: Context) -> int:
    cfg = ctx.cfg
    G = cfg.group
    if not G.peripherals:
        raise ConfigError(f"line 0: group {cfg.group_text} has no peripheral subgroups")
    r_win = cfg.radii[0] if cfg.radii else Fraction(6)
    for mid, md in cfg.metrics.items():
        m = md.metric
        if not m.is_word:
            continue
        try:
            bad = cross_validate(RelativeWindow(m, r_win))
        except ValueError:
            continue  # generators not confined to single factors
        rows = [("window_radius", r_win), ("bfs_formula_mismatches", len(bad))]
        ctx.write(f"relhyp-{mid}-distance.csv", table_csv(["quantity", "value"], rows))
        # projections of the non-peripheral generators onto each peripheral subgroup
        prow = []
        for f in G.peripherals:
            H = CosetId(f, ())
            for lab, s in zip(m.gens.labels, m.gens.elements):
                if s[0][0] == f:
                    continue
                pr = coset_projection(m, H, s)
                pts = " ".join(sorted(G.key(p) for p in pr.points))
                prow.append((f, lab, pr.distance, pr.diameter, pts))
        ctx.write(f"relhyp-{mid}-projection.csv",
                  table_csv(["factor", "generator", "distance", "diameter", "points"], prow))
        irow = []
        for f in G.peripherals:
            H = CosetId(f, ())
            for lab, s in zip(m.gens.labels, m.gens.elements):
                c2 = coset_of(G, s, f)
                if s[0][0] == f or c2 == H:
                    continue
                for D in cfg.D:
                    for r in cfg.radii:
                        irow.append((f, lab, D, r, coset_intersection_diameter(m, H, c2, D, r)))
        ctx.write(f"relhyp-{mid}-intersection.csv",
                  table_csv(["factor", "generator", "D", "radius", "diameter"], irow))
        rng = cfg.rng(f"lifts:{mid}")
        lrow = []
        for i in range(50):
            g = G.random_element(rng, 6)
            path, fit = lift_relative_geodesic(m, relative_geodesic(m.gens, g), cfg.L_cap)
            lrow.append((i, G.key(g), path.length, fit.K, fit.L))
        ctx.write(f"relhyp-{mid}-lifts.csv", table_csv(["sample", "element", "length", "K", "L"], lrow))
        ctx.say(f"{mid}: {len(bad)} distance mismatches, {len({(r[3], r[4]) for r in lrow})} distinct lift fits")
    return EXIT_OK


def cmd_witness(ctx: Context) -> int:
    cfg = ctx.cfg
    for pid, pair in ctx.pairs():
        rep = witness_search(pair, cfg.witness_radius, cfg.witness_n, cfg.delta_threshold,
                             K_cap=cfg.K_cap, L_cap=cfg.L_cap, seed=ctx.seed(f"witness:{pid}"))
        ctx.write(f"witness-{pid}.txt", rep.summary())
        ctx.write(f"witness-{pid}.csv", rep.to_csv())
        ctx.say(f"{pid}: {rep.verdict}")
    return EXIT_OK


def cmd_suite(ctx: Context) -> int:
    from .suite import run_suite, suite_csv

    results = run_suite(ctx.cfg.seed, config_path=ctx.cfg.path, echo=None if ctx.quiet else print)
    ctx.write("suite.csv", suite_csv(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_FINDING


COMMANDS = {
    "ball": cmd_ball, "spectrum": cmd_spectrum, "compare": cmd_compare, "hyperbolicity": cmd_hyperbolicity,
    "relhyp": cmd_relhyp, "witness": cmd_witness, "suite": cmd_suite,
}


def run(subcommand: str, config_path: str, out: str | None = None, cache: str | None = None,
        quiet: bool = False) -> int:
    """Run one subcommand; returns the exit status."""
    try:
        if subcommand not in COMMANDS:
            raise ConfigError(f"line 0: unknown subcommand {subcommand!r}")
        cfg = load_config(config_path)
        ctx = Context(cfg, out or cfg.output, cache, quiet)
        code = COMMANDS[subcommand](ctx)
        if ctx.audits and subcommand != "ball":
            ctx.write(f"audit-{subcommand}.csv",
                      table_csv(["metric", "radius", "checked", "mismatches"], ctx.audits))
        return code
    except (ConfigError, CacheMismatch, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BudgetExceeded, OutOfBall) as exc:
        print(f"budget/window error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except MetricLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="metriclab", description="Experiments on invariant metrics of groups.")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", required=True, help="INI experiment config")
    ap.add_argument("--out", default=None, help="output directory (default: config 'output')")
    ap.add_argument("--cache", default=None, help="ball cache directory")
    ap.add_argument("-q", "--quiet", action="store_true")
    args = ap.parse_args(argv)
    return run(args.subcommand, args.config, args.out, args.cache, args.quiet)


if __name__ == "__main__":
    sys.exit(main())
