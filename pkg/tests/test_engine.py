import numpy as np
import pytest

from adversarial_ka.adversary import AffineRational, Identity, Translation, random_rational_affine
from adversarial_ka.engine import (ConstructionFailure, Target, appx_eval, appx_grid, inner_arguments,
                                   iterate, lemma_single, lemma_step, represent_multi, solid_oscillation,
                                   sup_norm_grid)
from adversarial_ka.inner import DomainError, forced_table
from adversarial_ka.outer import OuterFunction, build_outer, sum_outer
from adversarial_ka.targets import make_target

ALPHA = 1 / 15
LAMBDA = 2 / 3 + ALPHA


@pytest.fixture(scope="module")
def xy_lemma():
    return lemma_single(make_target("xy"), Identity(5), ALPHA)


def test_zero_outer_gives_zero(xy_lemma):
    t, _, _ = xy_lemma
    zero = OuterFunction(np.empty(0), np.empty(0), 0.0)
    x = np.random.default_rng(0).random((50, 2))
    assert np.array_equal(appx_eval(t, zero, x), np.zeros(50))


def test_approximator_additive_in_outer(xy_lemma):
    t, g, _ = xy_lemma
    other = build_outer([(0.0, 0.2), (1.0, -0.1), (2.5, 0.3)], B=1)
    x = np.random.default_rng(1).random((200, 2))
    both = appx_eval(t, sum_outer([g, other]), x)
    assert np.max(np.abs(both - appx_eval(t, g, x) - appx_eval(t, other, x))) <= 1e-12


def test_representative_term_is_forced_value_exactly(xy_lemma):
    t, g, _ = xy_lemma
    f = make_target("xy")
    lat = t.lattice
    table = forced_table([t, t])
    for j in lat.ranks:
        lo, hi = lat.bounds(j)
        mids = (lo + hi) / (2 * lat.N)
        k = int(np.flatnonzero(table.rank == j)[len(lo) + 1])
        pt = mids[table.idx[k]]
        arg = inner_arguments(t, pt)[0, j - 1]
        assert arg == table.pos[k]
        assert g(arg) == f(pt) / 3


def test_constant_one_has_error_two_thirds():
    one = make_target("constant")
    t, g, rep = lemma_single(one, Identity(5), ALPHA)
    assert np.all(g.values == 1 / 3)
    assert np.max(np.abs(appx_grid(t, g, 64) - 5 / 3)) <= 1e-15
    assert rep.grid_error == pytest.approx(2 / 3, abs=1e-15)


def test_lemma_bound_for_xy(xy_lemma):
    _, g, rep = xy_lemma
    assert rep.grid_error < LAMBDA
    assert rep.g_norm <= 1 / 3


def test_failure_carries_witness(xy_lemma):
    t, _, rep = xy_lemma
    with pytest.raises(ConstructionFailure) as info:
        lemma_step(make_target("xy"), t, alpha=-0.1)
    assert info.value.value == pytest.approx(rep.grid_error)
    assert len(info.value.witness) == 2


def test_sup_norm_grid_examples():
    val, where = sup_norm_grid(make_target("xy"), 4)
    assert val == 1.0 and list(where) == [1.0, 1.0]
    val, _ = sup_norm_grid(lambda x: x[..., 0] - 0.5, 10)
    assert val == 0.5
    with pytest.raises(ValueError):
        sup_norm_grid(make_target("xy"), 1)


def test_points_outside_cube_rejected(xy_lemma):
    t, g, _ = xy_lemma
    with pytest.raises(DomainError):
        appx_eval(t, g, np.array([[0.5, 1.2]]))


def test_affine_stored_values_match_adversary():
    h = random_rational_affine(5, np.random.default_rng(3))
    t, _, _ = lemma_single(make_target("xy"), h, ALPHA)
    x = np.random.default_rng(4).random((300, 2))
    direct = inner_arguments(t, x, through_adversary=True)
    assert np.max(np.abs(direct - inner_arguments(t, x))) <= 1e-10


def test_zero_iterations():
    _, rep = iterate(make_target("xy"), Identity(5), 0)
    assert len(rep.rows) == 1
    assert rep.rows[0]["residual_norm"] == 1.0


def test_one_faithful_step_equals_lemma(xy_lemma):
    _, _, lemma_rep = xy_lemma
    _, rep = iterate(make_target("xy"), Identity(5), 1, mode="theorem-faithful", offgrid_samples=10)
    assert rep.rows[1]["residual_norm"] == lemma_rep.grid_error


def test_cascade_norm_chain():
    levels, rep = iterate(make_target("xy"), Identity(5), 3, offgrid_samples=2000)
    norms = [r["residual_norm"] for r in rep.rows]
    for m in range(1, len(norms)):
        assert norms[m] <= LAMBDA * norms[m - 1]
        assert norms[m] <= LAMBDA ** m
    assert len(levels) == 3


def test_cascade_rejects_bad_arguments():
    with pytest.raises(ValueError):
        iterate(make_target("xy"), Identity(5), -1)
    with pytest.raises(ValueError):
        iterate(make_target("xy"), Identity(5), 1, mode="greedy")


def test_multi_needs_one_adversary_per_variable():
    with pytest.raises(ValueError):
        represent_multi(make_target("xy"), [Identity(5)] * 3, 1)


def test_solid_oscillation_of_constant_is_zero(xy_lemma):
    t, _, _ = xy_lemma
    assert solid_oscillation(t.lattice, np.full((65, 65), 0.3), 64) == 0.0
    G = 4 * t.lattice.N
    xs = np.linspace(0, 1, G + 1)
    ramp = np.add.outer(xs, np.zeros(G + 1))
    # an interior red interval spans 4 cells, so the ramp varies by 4/N on its solids
    assert solid_oscillation(t.lattice, ramp, G) == pytest.approx(4 / t.lattice.N)


def test_translation_and_scaling_accepted():
    for h in (Translation(tuple([0.1] * 5)), AffineRational.scaled_identity(5, 3, 0)):
        _, _, rep = lemma_single(make_target("xy"), h, ALPHA)
        assert rep.grid_error < LAMBDA


def test_target_normalization():
    t = Target("twice", lambda x: 2 * x[..., 0], 2.0, 2.0)
    u = t.normalized()
    assert u.lip == 1.0 and u(np.array([0.5, 0.0])) == 0.5
    with pytest.raises(ValueError):
        Target("zero", lambda x: 0 * x[..., 0], 0.0, 0.0).normalized()
