"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line with the measured quantity
before asserting, so ``pytest -s`` or the captured log shows the numbers.
"""

import time
from fractions import Fraction

import numpy as np
import pytest

from adversarial_ka import cli
from adversarial_ka.adversary import CoordMonotonePoly, Identity, Translation, random_rational_affine
from adversarial_ka.engine import iterate, lemma_multi, lemma_single
from adversarial_ka.exact import GammaNumber, gamma_basis, gn_compare
from adversarial_ka.inner import (ConstructionBudget, ReferenceTuple, choose_resolution, construct_phi_h,
                                  forced_table, inner_requirements)
from adversarial_ka.lattice import RedLattice
from adversarial_ka.probes import (affine_commute_check, corner_obstruction, corner_obstruction_lp,
                                   equicontinuity_probe)
from adversarial_ka.targets import catalog, make_target

ALPHA = 1 / 15
BOUND = 2 / 3 + ALPHA


@pytest.fixture
def verdict(capsys):
    def emit(label, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {label}: {detail}")
        return ok
    return emit


def test_criterion_01_coverage(verdict):
    start = time.perf_counter()
    violations = 0
    for N in range(5, 101, 5):
        lat = RedLattice(2, N)
        pts = sorted({Fraction(k, 2 * N) for k in range(2 * N + 1)})
        masks = np.array([sum(1 << (r - 1) for r in lat.rank_coverage_1d(x)) for x in pts])
        counts = np.array([bin(v).count("1") for v in range(32)])
        violations += int(np.sum(counts[masks] < 4))
        violations += int(np.sum(counts[np.bitwise_and.outer(masks, masks)] < 3))
    elapsed = time.perf_counter() - start
    ok = verdict("1 (coverage)", violations == 0 and elapsed < 10,
                 f"{violations} violations in {elapsed:.2f}s")
    assert ok


def _resolution(f, h, eps=0.04):
    eps_prime, lip = inner_requirements(ReferenceTuple(5), h, eps)
    unit = f.normalized() if f.norm_hint not in (0, 1) else f
    return choose_resolution(unit.lip, ALPHA, lip, eps_prime / 4, 2)


def test_criterion_02_forced_distinctness(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    adversaries = [Identity(5)] + [random_rational_affine(5, rng) for _ in range(20)]
    basis = gamma_basis(2)
    built = {}
    collisions = 0
    cases = 0
    for f in catalog(2):
        for k, h in enumerate(adversaries):
            cases += 1
            N = _resolution(f, h)
            # forced positions depend on the adversary and the resolution only
            if (k, N) in built:
                continue
            t = construct_phi_h(ReferenceTuple(5), h, ConstructionBudget.default(0.04, N), basis)
            table = forced_table([t, t])
            if not table.exact_distinct():
                collisions += 1
            # the closest float neighbours also compare unequal exactly
            order = np.argsort(table.pos)
            k_min = int(np.argmin(np.diff(table.pos[order])))
            a, b = order[k_min], order[k_min + 1]
            pa, pb = (GammaNumber(basis, [t.constant(int(table.rank[i]), int(c)) for c in table.idx[i]])
                      for i in (a, b))
            if gn_compare(pa, pb) == 0:
                collisions += 1
            built[(k, N)] = True
    elapsed = time.perf_counter() - start
    ok = verdict("2 (forced distinctness)", collisions == 0 and elapsed < 30,
                 f"{cases} cases, {len(built)} constructions, {collisions} collisions, {elapsed:.1f}s")
    assert ok


def test_criterion_03_lemma_bound(verdict):
    rng = np.random.default_rng(3)
    adversaries = [Identity(5)] + [random_rational_affine(5, rng) for _ in range(5)]
    worst_err, worst_norm, slowest = 0.0, 0.0, 0.0
    failures = []
    for f in catalog(2):
        for h in adversaries:
            start = time.perf_counter()
            _, g, rep = lemma_single(f, h, ALPHA, grid=512, check=False)
            slowest = max(slowest, time.perf_counter() - start)
            worst_err = max(worst_err, rep.grid_error)
            worst_norm = max(worst_norm, rep.g_norm)
            if not (rep.grid_error < BOUND and rep.g_norm <= 1 / 3):
                failures.append((f.name, rep.grid_error, rep.g_norm))
    ok = verdict("3 (lemma bound)", not failures and slowest < 60,
                 f"max grid error {worst_err:.4f} < {BOUND:.4f}, max |g| {worst_norm:.6f} <= 1/3, "
                 f"slowest case {slowest:.1f}s")
    assert ok, failures


@pytest.fixture(scope="module")
def cascade_run():
    start = time.perf_counter()
    _, report = iterate(make_target("xy"), Identity(5), 6, "adaptive-cascade", ALPHA)
    return report, time.perf_counter() - start


def test_criterion_04_geometric_decay(verdict, cascade_run):
    report, elapsed = cascade_run
    norms = [r["residual_norm"] for r in report.rows]
    ratios = [norms[m] / norms[m - 1] for m in range(1, len(norms))]
    ok = (len(norms) == 7 and all(r <= 0.8 for r in ratios) and norms[-1] <= 0.8 ** 6
          and elapsed < 300)
    verdict("4 (geometric decay)", ok,
            f"ratios {', '.join(f'{r:.4f}' for r in ratios)}; |r_6| = {norms[-1]:.4f}; {elapsed:.1f}s")
    assert ok


def test_criterion_05_norm_chain(verdict, cascade_run):
    report, _ = cascade_run
    rows = report.rows
    slack = [rows[m - 1]["residual_norm"] / 3 - rows[m]["g_norm"] for m in range(1, len(rows))]
    ok = all(s >= 0 for s in slack)
    verdict("5 (norm chain)", ok, f"min slack of |r_(m-1)|/3 - |g_m| = {min(slack):.3g}")
    assert ok


def test_criterion_06_multi_adversary(verdict):
    start = time.perf_counter()
    hs = [Identity(5), Translation((Fraction(1, 7),) * 5)]
    tuples, g, rep = lemma_multi(make_target("xy"), hs, ALPHA, check=False)
    elapsed = time.perf_counter() - start
    shape_ok = True
    for slot, t in enumerate(tuples):
        for j in t.lattice.ranks:
            for k in range(t.lattice.count(j)):
                c = t.constant_gn(j, k).coeffs
                shape_ok &= c[slot] != 0 and c[1 - slot] == 0
    ok = rep.grid_error < BOUND and shape_ok and elapsed < 60
    verdict("6 (multi-adversary)", ok,
            f"grid error {rep.grid_error:.4f} < {BOUND:.4f}, constants q and q*sqrt2: {shape_ok}, "
            f"{elapsed:.1f}s")
    assert ok


def test_criterion_07_corner(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    grids = rng.uniform(-10, 10, (1000, 4))
    lp_gap = max(abs(corner_obstruction(v) - corner_obstruction_lp(v)) for v in grids)
    u, v = rng.normal(size=(50, 2)), rng.normal(size=(50, 2))
    additive = max(corner_obstruction(np.add.outer(a, b)) for a, b in zip(u, v))
    flip = corner_obstruction([1, -1, -1, 1])
    elapsed = time.perf_counter() - start
    ok = abs(flip - 1) <= 1e-9 and additive <= 1e-9 and lp_gap <= 1e-9 and elapsed < 5
    verdict("7 (corner obstruction)", ok,
            f"flip table {flip}, additive max {additive:.2e}, LP gap {lp_gap:.2e}, {elapsed:.2f}s")
    assert ok


def test_criterion_08_affine_commuting(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(8)
    f = make_target("xy")
    worst = 0.0
    for k in range(50):
        h = random_rational_affine(5, rng)
        t, g, _ = lemma_single(f, h, ALPHA, check=False)
        worst = max(worst, affine_commute_check(h, t, g, samples=1000, seed=k))
    poly = CoordMonotonePoly.uniform(5, [0, 1, 0, 1])
    t, g, _ = lemma_single(f, poly, ALPHA, check=False)
    nonlinear = affine_commute_check(poly, t, g, samples=1000)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and nonlinear > 0.01 and elapsed < 30
    verdict("8 (affine commuting)", ok,
            f"affine max {worst:.2e}, nonlinear {nonlinear:.3f}, {elapsed:.1f}s")
    assert ok


def test_criterion_09_equicontinuity_mechanism(verdict):
    start = time.perf_counter()
    rep = equicontinuity_probe(make_target("xy"))
    elapsed = time.perf_counter() - start
    v = rep.verdict
    base_lip = v["base_lip"]
    hit = any(r["min_gap"] < 0.01 * v["base_min_gap"] and r["lip"] >= 10 * base_lip for r in rep.rows)
    ok = hit and v["consistency_holds"] and elapsed < 120
    verdict("9 (equicontinuity mechanism)", ok,
            f"gap ratio {v['min_gap_ratio']:.2e}, Lip ratio {v['lip_ratio']:.1f}, "
            f"consistency {v['consistency_holds']}, {elapsed:.1f}s")
    assert ok


DETERMINISM_RUNS = [
    ["coverage"],
    ["lemma", "--target", "xy", "--adversary", "random-affine", "--seed", "5"],
    ["iterate", "--target", "xy", "--M", "6"],
    ["multi", "--target", "xy"],
    ["probe-corner", "--values", "1,-1,-1,1"],
    ["probe-commute", "--count", "50"],
    ["probe-equicontinuity", "--target", "xy"],
]


def test_criterion_10_determinism(verdict, tmp_path):
    differing = []
    for argv in DETERMINISM_RUNS:
        blobs = []
        for rep in range(2):
            out = tmp_path / f"{argv[0]}-{rep}"
            code = cli.run(argv + ["--out", str(out)])
            assert code == 0, argv
            blobs.append((out / "report.json").read_bytes())
        if blobs[0] != blobs[1]:
            differing.append(argv[0])
    ok = not differing
    verdict("10 (determinism)", ok,
            f"{len(DETERMINISM_RUNS)} subcommands rerun, differing reports: {differing or 'none'}")
    assert ok
