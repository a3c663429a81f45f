"""Command line entry point: ``ka-adversarial <subcommand> [options]``.

Options may also come from a YAML file given with ``--config``; flags win.
Exit status is 0 when every asserted bound held, 1 when one failed (the
report then carries the witness) and 2 for invalid configuration.
"""

from __future__ import annotations

import argparse
import itertools
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
import yaml

from . import engine, inner, probes, reports
from .adversary import AdversaryError, CoordMonotonePoly, adversary_from_spec, random_rational_affine
from .exact import gamma_basis
from .lattice import RedLattice
from .targets import TARGET_NAMES, make_target

CONFIG_KEYS = {
    "n", "target", "target_seed", "adversary", "adversaries", "mode", "M", "alpha", "grid", "N",
    "D", "eps", "seed", "out", "values", "samples", "count", "direction", "t_points", "N_max",
    "verify",
}

EPILOG = """\
CSV columns
  iterations.csv / error-vs-iteration.csv:
    m, N, residual_norm, g_norm, g_lip, knots, min_gap, lambda_achieved,
    solid_variation_flag, offgrid_residual_norm
  knots.csv: position_float, position_exact, value
  probe-equicontinuity rows.csv:
    t, min_gap, lip, adjacent_ratio, grid_error, reuse_error, crossings, collision, consistent
  lip-vs-t.csv: t, lip    gap-vs-t.csv: t, min_gap

Environment
  KA_THREADS caps the worker threads of the equi-continuity probe (default 1).
"""


class UsageError(Exception):
    pass


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML file with option values")
    p.add_argument("--out", type=Path, help="output directory (default: results/<subcommand>)")
    p.add_argument("--seed", type=int)
    p.add_argument("--verify", action="store_true", default=None,
                   help="re-check construction invariants on the produced artifacts")


def _add_run(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int)
    p.add_argument("--target", choices=TARGET_NAMES)
    p.add_argument("--target-seed", dest="target_seed", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--grid", type=int)
    p.add_argument("--N", type=int, help="resolution override")
    p.add_argument("--eps", type=float, help="allowed distance of the inner tuple from its reference")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ka-adversarial", epilog=EPILOG,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lemma", help="one outer function for one adversary", epilog=EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    _add_common(p)
    _add_run(p)
    p.add_argument("--adversary", help="identity | random-affine | family:<k> | monotone-poly")

    p = sub.add_parser("iterate", help="residual iteration", epilog=EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    _add_common(p)
    _add_run(p)
    p.add_argument("--adversary")
    p.add_argument("--mode", choices=("theorem-faithful", "adaptive-cascade"))
    p.add_argument("--M", type=int)

    p = sub.add_parser("multi", help="one adversary per input variable", epilog=EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    _add_common(p)
    _add_run(p)
    p.add_argument("--adversaries", help="comma separated, one per variable, e.g. identity,translation:1/7")
    p.add_argument("--mode", choices=("theorem-faithful", "adaptive-cascade"))
    p.add_argument("--M", type=int, help="iterations (default 1: a single lemma step)")

    p = sub.add_parser("coverage", help="rank coverage of red intervals and solids")
    _add_common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--N-max", dest="N_max", type=int)

    p = sub.add_parser("probe-corner", help="best additive fit of a 2x2 table")
    _add_common(p)
    p.add_argument("--values", help="four numbers f11,f12,f21,f22")

    p = sub.add_parser("probe-commute", help="affine maps commute with the weighted sum")
    _add_common(p)
    p.add_argument("--count", type=int, help="random affine adversaries")
    p.add_argument("--samples", type=int)

    p = sub.add_parser("probe-equicontinuity", help="outer Lipschitz constant along a translation path",
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    _add_common(p)
    _add_run(p)
    p.add_argument("--direction", help="comma separated, 2n+1 entries (default: built-in search)")
    p.add_argument("--t-points", dest="t_points", type=int)
    return parser


DEFAULTS = {
    "n": 2, "target": "xy", "target_seed": 0, "adversary": "identity", "adversaries": None,
    "mode": "adaptive-cascade", "M": None, "alpha": 1 / 15, "grid": None, "N": None, "D": None,
    "eps": engine.DEFAULT_EPS, "seed": 0, "out": None, "values": "1,-1,-1,1", "samples": 1000,
    "count": 50, "direction": None, "t_points": 101, "N_max": 100, "verify": False,
}


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if args.config is not None:
        try:
            loaded = yaml.safe_load(args.config.read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        if not isinstance(loaded, dict):
            raise UsageError("config must be a mapping")
        unknown = set(loaded) - CONFIG_KEYS
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg.update(loaded)
    for key, value in vars(args).items():
        if key in ("config", "command") or value is None:
            continue
        cfg[key] = value
    _validate(cfg)
    return cfg


def _validate(cfg: dict) -> None:
    checks = [
        (cfg["n"] in (2, 3), "n must be 2 or 3"),
        (0 < cfg["alpha"] < 1, "alpha must lie in (0, 1)"),
        (cfg["M"] is None or cfg["M"] >= 0, "M must be non-negative"),
        (cfg["grid"] is None or cfg["grid"] >= 2, "grid must be at least 2"),
        (cfg["N"] is None or cfg["N"] >= 2 * cfg["n"] + 1, "N must be at least 2n+1"),
        (cfg["eps"] > 0, "eps must be positive"),
        (cfg["samples"] >= 1, "samples must be positive"),
        (cfg["count"] >= 1, "count must be positive"),
        (cfg["t_points"] >= 2, "t_points must be at least 2"),
        (cfg["N_max"] >= 2 * cfg["n"] + 1, "N_max must be at least 2n+1"),
        (cfg["target"] in TARGET_NAMES, f"target must be one of {', '.join(TARGET_NAMES)}"),
    ]
    for ok, message in checks:
        if not ok:
            raise UsageError(message)


def parse_adversary(spec, m: int, rng: np.random.Generator):
    """``identity``, ``random-affine``, ``family:<k>``, ``translation:<v>``, ``monotone-poly`` or a mapping."""
    if isinstance(spec, dict):
        return adversary_from_spec(spec, m)
    name, _, arg = str(spec).partition(":")
    if name == "identity":
        return adversary_from_spec("identity", m)
    if name == "random-affine":
        return random_rational_affine(m, rng)
    if name == "family":
        return adversary_from_spec({"kind": "family", "index": int(arg or 0)}, m)
    if name == "translation":
        parts = [p for p in arg.split(";") if p] or ["1/7"]
        vec = [Fraction(p) for p in parts]
        if len(vec) == 1:
            vec = vec * m
        return adversary_from_spec({"kind": "translation", "vector": [str(v) for v in vec]}, m)
    if name == "monotone-poly":
        return CoordMonotonePoly.uniform(m, [0, 1, 0, 1])
    raise UsageError(f"unknown adversary {spec!r}")


def _outdir(cfg, command) -> Path:
    return Path(cfg["out"]) if cfg["out"] else Path("results") / command


def _echo(cfg: dict) -> dict:
    return {k: v for k, v in sorted(cfg.items()) if k not in ("out",)}


def cmd_lemma(cfg):
    n = cfg["n"]
    rng = np.random.default_rng(cfg["seed"])
    f = make_target(cfg["target"], n, cfg["target_seed"])
    h = parse_adversary(cfg["adversary"], 2 * n + 1, rng)
    phi, g, rep = engine.lemma_single(f, h, cfg["alpha"], eps=cfg["eps"], grid=cfg["grid"],
                                      N=cfg["N"], check=False)
    ok = rep.grid_error < rep.bound and rep.g_norm <= 1 / (n + 1)
    checks = {}
    if cfg["verify"]:
        checks = _verify_tuples([phi] * n, g, n)
        ok = ok and all(checks.values())
    out = _outdir(cfg, "lemma")
    (out / "knots.csv").parent.mkdir(parents=True, exist_ok=True)
    (out / "knots.csv").write_text(g.to_csv())
    result = {"schema": 1, "command": "lemma", "config": _echo(cfg), "adversary": h.to_spec(),
              "result": rep.to_json(), "bound_held": ok, "verify": checks}
    reports.write_json(out / "report.json", result)
    print(f"grid error {rep.grid_error:.6f} (bound {rep.bound:.6f}), |g| = {rep.g_norm:.6f}")
    return 0 if ok else 1


def _verify_tuples(tuples, g, n) -> dict:
    checks = {}
    for t in {id(t): t for t in tuples}.values():
        try:
            inner.verify_tuple(t)
            checks[f"tuple_slot_{t.slot}"] = True
        except inner.InvariantError:
            checks[f"tuple_slot_{t.slot}"] = False
    table = inner.forced_table(tuples)
    checks["forced_positions_distinct"] = bool(table.exact_distinct())
    checks["outer_bound"] = bool(np.max(np.abs(g.values), initial=0) <= g.bound)
    return checks


def cmd_iterate(cfg, multi=False):
    n = cfg["n"]
    rng = np.random.default_rng(cfg["seed"])
    f = make_target(cfg["target"], n, cfg["target_seed"])
    M = cfg["M"] if cfg["M"] is not None else (1 if multi else 6)
    kw = dict(grid=cfg["grid"], eps=cfg["eps"], N=cfg["N"], seed=cfg["seed"])
    failure = None
    command = "multi" if multi else "iterate"
    if multi:
        specs = cfg["adversaries"] or ",".join(["identity"] + ["translation:1/7"] * (n - 1))
        if isinstance(specs, str):
            specs = specs.split(",")
        if len(specs) != n:
            raise UsageError(f"need {n} adversaries, got {len(specs)}")
        hs = [parse_adversary(s, 2 * n + 1, rng) for s in specs]
        adv = [h.to_spec() for h in hs]
        run = lambda: engine.represent_multi(f, hs, M, cfg["alpha"], mode=cfg["mode"], **kw)
    else:
        h = parse_adversary(cfg["adversary"], 2 * n + 1, rng)
        adv = h.to_spec()
        run = lambda: engine.iterate(f, h, M, cfg["mode"], cfg["alpha"], **kw)
    try:
        result, report = run()
    except engine.DecayFailure as exc:
        failure = {"message": str(exc), "diagnostics": exc.diagnostics}
        report = None
    out = _outdir(cfg, command)
    doc = {"schema": 1, "command": command, "config": _echo(cfg), "adversary": adv}
    if report is None:
        doc.update(bound_held=False, failure=failure)
        reports.write_json(out / "report.json", doc)
        print(failure["message"], file=sys.stderr)
        return 1
    rows = report.rows
    lam = n / (n + 1) + 2 * cfg["alpha"]
    norm_chain = all(r["g_norm"] <= rows[i - 1]["residual_norm"] / (n + 1)
                     for i, r in enumerate(rows) if i > 0)
    if cfg["mode"] == "adaptive-cascade":
        ok = all(r["lambda_achieved"] <= lam for r in rows[1:]) and norm_chain
    else:
        ok = len(rows) < 2 or rows[1]["residual_norm"] < n / (n + 1) + cfg["alpha"]
        ok = ok and norm_chain
    if multi and M == 1 and len(rows) > 1:
        ok = ok and rows[1]["residual_norm"] < n / (n + 1) + cfg["alpha"]
    checks = {}
    if cfg["verify"]:
        levels = result if cfg["mode"] == "adaptive-cascade" else [result]
        for k, (tuples, g) in enumerate(levels):
            for name, v in _verify_tuples(tuples, g, n).items():
                checks[f"level_{k + 1}_{name}"] = v
        ok = ok and all(checks.values())
    doc.update(report.to_json())
    doc.update(bound_held=ok, norm_chain=norm_chain, verify=checks)
    reports.write_json(out / "report.json", doc)
    reports.write_csv(out / "iterations.csv", reports.ITERATION_COLUMNS, rows)
    reports.emit_plot_data(report, out)
    for r in rows:
        print(f"m={r['m']} N={r['N']} |r|={r['residual_norm']:.6f} ratio={r['lambda_achieved']}")
    return 0 if ok else 1


def cmd_coverage(cfg):
    n = cfg["n"]
    m = 2 * n + 1
    rows = []
    violations = 0
    for N in range(m, cfg["N_max"] + 1, m):
        lat = RedLattice(n, N)
        pts = sorted({Fraction(k, 2 * N) for k in range(2 * N + 1)})
        sets = {x: lat.rank_coverage_1d(x) for x in pts}
        bad1 = sum(len(s) < 2 * n for s in sets.values())
        bad2 = 0
        for combo in itertools.product(pts, repeat=n):
            cov = frozenset.intersection(*(sets[x] for x in combo))
            bad2 += len(cov) < n + 1
        violations += bad1 + bad2
        rows.append({"N": N, "points_1d": len(pts), "violations_1d": bad1,
                     "points_nd": len(pts) ** n, "violations_nd": bad2})
    out = _outdir(cfg, "coverage")
    reports.write_json(out / "report.json", {"schema": 1, "command": "coverage", "config": _echo(cfg),
                                             "rows": rows, "violations": violations,
                                             "bound_held": violations == 0})
    reports.write_csv(out / "coverage.csv", ("N", "points_1d", "violations_1d", "points_nd", "violations_nd"), rows)
    print(f"{len(rows)} resolutions, {violations} violations")
    return 0 if violations == 0 else 1


def cmd_corner(cfg):
    try:
        vals = [float(v) for v in str(cfg["values"]).split(",")]
    except ValueError as exc:
        raise UsageError(f"bad --values: {exc}") from exc
    if len(vals) != 4:
        raise UsageError("--values needs four numbers")
    exact = probes.corner_obstruction(vals)
    lp = probes.corner_obstruction_lp(vals)
    ok = abs(exact - lp) <= 1e-9
    out = _outdir(cfg, "probe-corner")
    reports.write_json(out / "report.json", {"schema": 1, "command": "probe-corner", "config": _echo(cfg),
                                             "min_max_error": exact, "lp_value": lp, "bound_held": ok})
    print(exact)
    return 0 if ok else 1


def cmd_commute(cfg):
    n = cfg["n"]
    m = 2 * n + 1
    rng = np.random.default_rng(cfg["seed"])
    f = make_target(cfg["target"], n, cfg["target_seed"])
    rows = []
    for k in range(cfg["count"]):
        h = random_rational_affine(m, rng)
        phi, g, _ = engine.lemma_single(f, h, cfg["alpha"], eps=cfg["eps"])
        rows.append({"adversary": k, "kind": "affine",
                     "discrepancy": probes.affine_commute_check(h, phi, g, cfg["samples"], seed=k)})
    poly = CoordMonotonePoly.uniform(m, [0, 1, 0, 1])
    phi, g, _ = engine.lemma_single(f, poly, cfg["alpha"], eps=cfg["eps"])
    nonlinear = probes.affine_commute_check(poly, phi, g, cfg["samples"], seed=0)
    worst = max(r["discrepancy"] for r in rows)
    ok = worst <= 1e-9 and nonlinear > 0.01
    rep = probes.ProbeReport("commute", {"count": cfg["count"], "samples": cfg["samples"]}, rows,
                             {"max_affine_discrepancy": worst, "nonlinear_discrepancy": nonlinear,
                              "affine_commutes": worst <= 1e-9, "nonlinear_fails": nonlinear > 0.01})
    out = _outdir(cfg, "probe-commute")
    doc = rep.to_json()
    doc.update(command="probe-commute", config=_echo(cfg), bound_held=ok)
    reports.write_json(out / "report.json", doc)
    reports.write_csv(out / "rows.csv", ("adversary", "kind", "discrepancy"), rows)
    print(f"affine max {worst:.3e}, nonlinear {nonlinear:.3f}")
    return 0 if ok else 1


def cmd_equicontinuity(cfg):
    n = cfg["n"]
    f = make_target(cfg["target"], n, cfg["target_seed"])
    direction = t_grid = None
    if cfg["direction"]:
        direction = [float(v) for v in str(cfg["direction"]).split(",")]
        if len(direction) != 2 * n + 1:
            raise UsageError(f"direction needs {2 * n + 1} entries")
        t_grid = np.linspace(0, 1, cfg["t_points"])
    rep = probes.equicontinuity_probe(f, direction, t_grid, alpha=cfg["alpha"], grid=cfg["grid"],
                                      seed=cfg["seed"], N=cfg["N"])
    ok = rep.verdict["consistency_holds"] and (direction is not None or rep.verdict["mechanism_observed"])
    out = _outdir(cfg, "probe-equicontinuity")
    doc = rep.to_json()
    doc.update(command="probe-equicontinuity", config=_echo(cfg), bound_held=ok)
    reports.write_json(out / "report.json", doc)
    reports.write_csv(out / "rows.csv", reports.PROBE_COLUMNS, rep.rows)
    reports.emit_plot_data(rep, out)
    v = rep.verdict
    print(f"min gap ratio {v['min_gap_ratio']:.3e}, Lip ratio {v['lip_ratio']:.3e}, "
          f"mechanism observed: {v['mechanism_observed']}")
    return 0 if ok else 1


COMMANDS = {
    "lemma": cmd_lemma,
    "iterate": cmd_iterate,
    "multi": lambda cfg: cmd_iterate(cfg, multi=True),
    "coverage": cmd_coverage,
    "probe-corner": cmd_corner,
    "probe-commute": cmd_commute,
    "probe-equicontinuity": cmd_equicontinuity,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except (UsageError, AdversaryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
