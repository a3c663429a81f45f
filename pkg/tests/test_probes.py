import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adversarial_ka.adversary import CoordMonotonePoly, Identity, random_rational_affine
from adversarial_ka.engine import lemma_single
from adversarial_ka.probes import (affine_commute_check, corner_obstruction, corner_obstruction_lp,
                                   equicontinuity_probe, thread_count)
from adversarial_ka.targets import make_target


def test_corner_examples():
    assert corner_obstruction([1, -1, -1, 1]) == 1.0
    assert corner_obstruction([[1, -1], [-1, -3]]) == 0.0
    assert corner_obstruction_lp([1, -1, -1, 1]) == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=4, max_size=4))
def test_corner_closed_form_matches_lp(vals):
    assert corner_obstruction(vals) == pytest.approx(corner_obstruction_lp(vals), abs=1e-7)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=2, max_size=2),
       st.lists(st.floats(-10, 10), min_size=2, max_size=2))
def test_additive_tables_have_no_obstruction(u, v):
    table = [[u[i] + v[j] for j in range(2)] for i in range(2)]
    assert corner_obstruction(table) <= 1e-12 * (1 + max(map(abs, u + v)))


@pytest.fixture(scope="module")
def affine_setup():
    h = random_rational_affine(5, np.random.default_rng(11))
    t, g, _ = lemma_single(make_target("xy"), h, 1 / 15)
    return h, t, g


def test_affine_adversary_commutes(affine_setup):
    h, t, g = affine_setup
    assert affine_commute_check(h, t, g, samples=500) <= 1e-10


def test_identity_commutes_trivially():
    t, g, _ = lemma_single(make_target("xy"), Identity(5), 1 / 15)
    assert affine_commute_check(Identity(5), t, g, samples=200) <= 1e-10


def test_cubic_does_not_commute():
    h = CoordMonotonePoly.uniform(5, [0, 1, 0, 1])
    t, g, _ = lemma_single(make_target("xy"), h, 1 / 15)
    assert affine_commute_check(h, t, g, samples=500) > 0.1


@pytest.fixture(scope="module")
def still_probe():
    direction = np.array([1.0, 0, 0, 0, 0])
    return equicontinuity_probe(make_target("xy"), direction, [0.0, 1e-9], N=320, grid=64)


def test_zero_shift_reproduces_base(still_probe):
    first = still_probe.rows[0]
    assert first["crossings"] == 0
    assert first["min_gap"] == still_probe.verdict["base_min_gap"]
    assert first["lip"] == still_probe.verdict["base_lip"]
    assert first["reuse_error"] == first["grid_error"]
    assert not first["collision"]


def test_probe_lipschitz_dominates_adjacent_ratio(still_probe):
    assert still_probe.verdict["consistency_holds"]
    for row in still_probe.rows:
        assert row["lip"] >= row["adjacent_ratio"] * (1 - 1e-12)


def test_probe_csv_has_header_and_rows(still_probe):
    lines = still_probe.to_csv().splitlines()
    assert len(lines) == 3
    assert lines[0].split(",")[0] == "t"


def test_probe_rejects_bad_direction():
    with pytest.raises(ValueError):
        equicontinuity_probe(make_target("xy"), np.ones(3), [0.0], N=320, grid=64)


def test_probe_rejects_adversarial_base():
    h = random_rational_affine(5, np.random.default_rng(0))
    t, _, _ = lemma_single(make_target("xy"), h, 1 / 15)
    with pytest.raises(ValueError):
        equicontinuity_probe(make_target("xy"), base_phi=t)


def test_thread_count(monkeypatch):
    monkeypatch.setenv("KA_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("KA_THREADS", "lots")
    assert thread_count() == 1
    monkeypatch.delenv("KA_THREADS")
    assert thread_count() == 1
