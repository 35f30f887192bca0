"""Strong maximal function, A1 weight series, and the bmo cutoff."""

import math

import numpy as np
import pytest

from dyadichardy import (
    ContractionError,
    GridError,
    GridFunction,
    OpenSetMask,
    ProductGrid,
    TauParams,
    a1_weight,
    check_a1,
    iterate_maximal,
    strong_maximal,
    strong_maximal_naive,
    tau_build,
)
from dyadichardy import generators


def random_function(grid, seed):
    rng = np.random.default_rng(seed)
    return GridFunction(grid, rng.uniform(-1, 1, grid.shape))


def test_maximal_constant():
    g = ProductGrid((1, 1), (2, 2))
    c = GridFunction.constant(g, 3.0)
    assert np.allclose(strong_maximal(c).values, 3.0)


def test_maximal_pinned_1d():
    # chi_{cell 0} on 4 cells: best covering window averages 1, 1/2, 1/3, 1/4
    g = ProductGrid((1,), (2,))
    f = GridFunction(g, np.array([1.0, 0.0, 0.0, 0.0]))
    assert strong_maximal(f).values.tolist() == [1.0, 0.5, 1.0 / 3.0, 0.25]


def test_maximal_sign_invariance():
    g = ProductGrid((1, 1), (2, 1))
    f = random_function(g, 0)
    assert np.array_equal(strong_maximal(f).values, strong_maximal(-f).values)


def test_maximal_dominates_and_monotone_iterates():
    g = ProductGrid((1, 2), (2, 1))
    f = random_function(g, 1)
    mf = strong_maximal(f)
    assert np.all(mf.values >= np.abs(f.values) - 1e-14)
    mmf = strong_maximal(mf)
    assert np.all(mmf.values >= mf.values - 1e-14)
    assert np.array_equal(iterate_maximal(f, 2).values, mmf.values)
    assert np.array_equal(iterate_maximal(f, 0).values, f.values)


def test_maximal_matches_naive_tolerance():
    for seed in range(6):
        g = ProductGrid((1, 1), (2, 2)) if seed % 2 else ProductGrid((1,), (4,))
        f = random_function(g, seed)
        a = strong_maximal(f).values
        b = strong_maximal_naive(f).values
        assert np.abs(a - b).max() <= 1e-12


def test_maximal_matches_naive_bitwise_on_dyadic_data():
    # dyadically quantized inputs make every window sum exact, so the
    # prefix-sum path and the literal loop agree bit for bit
    for seed in range(6):
        g = ProductGrid((1, 1), (2, 2))
        f = generators.random_uniform(g, seed=seed, dyadic_bits=20)
        a = strong_maximal(f).values
        b = strong_maximal_naive(f).values
        assert np.array_equal(a, b)


def test_a1_weight_full_domain():
    g = ProductGrid((1,), (2,))
    m, diag = a1_weight(OpenSetMask.full(g), TauParams(delta=0.5))
    assert np.allclose(m.values, 1.0)


def test_a1_weight_pinned_series():
    # E = cell 0 of 4, c = 1/2, two terms: m = (chi + (1/2)Mchi)/(3/2)
    g = ProductGrid((1,), (2,))
    E = OpenSetMask.from_cell_indices(g, [0])
    m, diag = a1_weight(E, TauParams(delta=0.5, c=0.5, kmax=1))
    expected = (np.array([1, 0, 0, 0.0]) + 0.5 * np.array([1, 0.5, 1 / 3, 0.25])) / 1.5
    assert np.allclose(m.values, expected, atol=1e-15)
    assert diag["terms_used"] == 2


def test_a1_weight_properties():
    g = ProductGrid((1, 1), (2, 2))
    E = OpenSetMask(g, np.random.default_rng(2).random(g.shape) < 0.2)
    if E.is_empty:
        E = OpenSetMask.from_cell_indices(g, [0])
    m, _ = a1_weight(E, TauParams(delta=0.5))
    assert np.all(m.values > 0)
    assert np.all(m.values <= 1.0 + 1e-14)
    assert np.all(m.values[E.cells] == 1.0)  # exact on E


def test_a1_weight_empty_set_rejected():
    g = ProductGrid((1,), (2,))
    with pytest.raises(GridError):
        a1_weight(OpenSetMask.empty(g), TauParams(delta=0.5))


def test_contraction_error_on_bad_c():
    g = ProductGrid((1,), (3,))
    E = OpenSetMask.from_cell_indices(g, [0])
    with pytest.raises(ContractionError):
        a1_weight(E, TauParams(delta=0.5, c=0.99, q=0.05))


def test_tau_basics():
    g = ProductGrid((1, 1), (2, 2))
    E = OpenSetMask.from_cell_indices(g, [0, 1, 4])
    rep = tau_build(E, TauParams(delta=0.5))
    tau = rep.tau.values
    assert np.all(tau[E.cells] == 1.0)  # tau = 1 on E exactly
    assert np.all(tau >= 0.0)
    assert np.all(tau <= 1.0 + 1e-14)
    assert rep.support_measure == float((tau > 0).sum()) * g.cell_volume
    # support characterization: tau > 0 iff m > e^{-1/delta}
    thresh = math.exp(-1.0 / rep.delta)
    assert np.array_equal(tau > 0, rep.m.values > thresh)


def test_log_m_in_bmo():
    from dyadichardy import little_bmo_norm
    g = ProductGrid((1,), (3,))
    E = OpenSetMask.from_cell_indices(g, [0, 1])
    m, _ = a1_weight(E, TauParams(delta=0.5))
    logm = GridFunction(g, np.log(m.values))
    assert np.isfinite(little_bmo_norm(logm).value)


def test_check_a1():
    g = ProductGrid((1,), (2,))
    assert check_a1(GridFunction.constant(g, 2.0)) == pytest.approx(1.0)
    E = OpenSetMask.from_cell_indices(g, [0])
    m, _ = a1_weight(E, TauParams(delta=0.5))
    c1 = check_a1(m)
    assert np.isfinite(c1) and c1 >= 1.0
    # scale invariance
    assert check_a1(m * 2.0) == pytest.approx(c1, rel=1e-12)
    with pytest.raises(GridError):
        check_a1(GridFunction.constant(g, 0.0))


def test_tau_params_validation():
    with pytest.raises(GridError):
        TauParams(delta=0.0)
    with pytest.raises(GridError):
        TauParams(delta=0.5, c=1.5)
    with pytest.raises(GridError):
        TauParams(delta=0.5, q=1.0)
