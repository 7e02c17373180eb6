import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import sparse

import piesn.reservoir as res
from piesn.errors import DegenerateMatrixError, DimensionError
from piesn.reservoir import (
    Reservoir,
    ReservoirConfig,
    advance,
    build_input_matrix,
    build_recurrent_matrix,
    build_reservoir,
    collect_states,
    spectral_radius,
)


def test_zero_input_scaling_gives_zero_matrix():
    w_in = build_input_matrix(ReservoirConfig(n_units=10, input_dim=2, sigma_in=0.0, avg_degree=3))
    assert w_in.shape == (10, 3)
    assert w_in.nnz == 0


def test_input_matrix_one_entry_per_row():
    cfg = ReservoirConfig(n_units=4, input_dim=2, sigma_in=0.7, avg_degree=2, seed=3)
    w_in = build_input_matrix(cfg).toarray()
    assert w_in.shape == (4, 3)
    assert np.count_nonzero(w_in) == 4
    assert np.all(np.count_nonzero(w_in, axis=1) == 1)
    assert np.all(np.abs(w_in) <= 0.7)


def test_input_matrix_deterministic():
    cfg = ReservoirConfig(n_units=50, input_dim=2, avg_degree=5, seed=11)
    assert (build_input_matrix(cfg) != build_input_matrix(cfg)).nnz == 0


def test_input_matrix_uses_all_columns():
    w_in = build_input_matrix(ReservoirConfig(n_units=3000, input_dim=2, avg_degree=1, seed=0)).tocoo()
    counts = np.bincount(w_in.col, minlength=3)
    assert np.all(counts > 900)


def test_recurrent_matrix_degree_and_radius():
    cfg = ReservoirConfig(n_units=100, input_dim=2, avg_degree=20, spectral_radius=1.0, seed=0)
    w = build_recurrent_matrix(cfg)
    assert w.nnz == 2000
    assert np.all(np.diff(w.indptr) == 20)
    assert abs(spectral_radius(w) - 1.0) <= 1e-6


def test_recurrent_matrix_scales_linearly_with_target_radius():
    half = build_recurrent_matrix(ReservoirConfig(100, 2, spectral_radius=0.5, avg_degree=20, seed=4))
    full = build_recurrent_matrix(ReservoirConfig(100, 2, spectral_radius=1.0, avg_degree=20, seed=4))
    assert np.array_equal(full.toarray(), 2.0 * half.toarray())


def test_degenerate_recurrent_matrix(monkeypatch):
    nilpotent = sparse.csr_matrix(np.triu(np.ones((5, 5)), k=1))
    monkeypatch.setattr(res, "_raw_recurrent", lambda cfg: nilpotent)
    with pytest.raises(DegenerateMatrixError, match="seed"):
        build_recurrent_matrix(ReservoirConfig(5, 1, avg_degree=2))


def test_spectral_radius_examples():
    assert spectral_radius(np.eye(7)) == pytest.approx(1.0, rel=1e-12)
    assert spectral_radius(np.diag([0.2, -0.9])) == pytest.approx(0.9, rel=1e-12)
    assert spectral_radius(np.array([[0.0, -1.0], [1.0, 0.0]])) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(DimensionError):
        spectral_radius(np.zeros((2, 3)))


def test_spectral_radius_large_matrix_uses_sparse_solver():
    rng = np.random.default_rng(0)
    n = res.DENSE_EIG_LIMIT + 300
    m = sparse.random(n, n, density=5 / n, random_state=rng, data_rvs=lambda k: rng.uniform(-1, 1, k)).tocsr()
    dense = float(np.max(np.abs(np.linalg.eigvals(m.toarray()))))
    assert spectral_radius(m) == pytest.approx(dense, rel=1e-8)


@pytest.fixture(scope="module")
def small_reservoir():
    return build_reservoir(ReservoirConfig(n_units=30, input_dim=2, avg_degree=5, seed=1))


def test_advance_with_zero_matrices():
    r = Reservoir(w_in=sparse.csr_matrix((5, 3)), w=sparse.csr_matrix((5, 5)),
                  config=ReservoirConfig(5, 2, avg_degree=1))
    assert np.array_equal(advance(np.ones(5), np.array([3.0, -4.0]), r), np.zeros(5))


def test_advance_from_rest_applies_bias(small_reservoir):
    r = small_reservoir
    x = advance(np.zeros(30), np.zeros(2), r)
    np.testing.assert_allclose(x, np.tanh(r.w_in.toarray()[:, -1]), rtol=0, atol=0)


@settings(max_examples=50, deadline=None)
@given(scale=st.floats(0, 1e6), seed=st.integers(0, 2**16))
def test_advance_stays_inside_open_cube(small_reservoir, scale, seed):
    rng = np.random.default_rng(seed)
    x = advance(rng.uniform(-1, 1, 30), scale * rng.standard_normal(2), small_reservoir)
    assert np.max(np.abs(x)) < 1.0


def test_advance_shape_errors(small_reservoir):
    with pytest.raises(DimensionError):
        advance(np.zeros(29), np.zeros(2), small_reservoir)
    with pytest.raises(DimensionError):
        advance(np.zeros(30), np.zeros(3), small_reservoir)


def test_collect_single_row_matches_advance(small_reservoir):
    u = np.array([[1.5, -0.3]])
    x0 = np.linspace(-0.5, 0.5, 30)
    states = collect_states(small_reservoir, u, x0)
    assert np.array_equal(states[0], advance(x0, u[0], small_reservoir))


def test_collect_states_deterministic(small_reservoir):
    u = np.random.default_rng(2).standard_normal((40, 2))
    assert np.array_equal(collect_states(small_reservoir, u), collect_states(small_reservoir, u))


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 40), k=st.integers(1, 40), seed=st.integers(0, 1000))
def test_collect_states_prefix_consistent(small_reservoir, n, k, seed):
    k = min(k, n)
    u = 10 * np.random.default_rng(seed).standard_normal((n, 2))
    assert np.array_equal(collect_states(small_reservoir, u)[:k], collect_states(small_reservoir, u[:k]))


def test_collect_states_shape_errors(small_reservoir):
    with pytest.raises(DimensionError):
        collect_states(small_reservoir, np.zeros((5, 3)))
    with pytest.raises(DimensionError):
        collect_states(small_reservoir, np.zeros(5))


def test_noisy_inputs_change_states():
    from piesn.data import add_noise, generate_dataset
    from piesn.dynamics import lorenz_model

    ds = generate_dataset(lorenz_model(), n_samples=2000)
    noisy = add_noise(ds, 20.0, seed=0)
    r = build_reservoir(ReservoirConfig(n_units=100, input_dim=2, seed=0))
    clean_states = collect_states(r, ds.measured[:-1])
    noisy_states = collect_states(r, noisy.measured[:-1])
    assert np.max(np.abs(clean_states - noisy_states)) > 1e-3


def test_config_validation():
    with pytest.raises(ValueError):
        ReservoirConfig(n_units=10, input_dim=2, avg_degree=11)
    with pytest.raises(ValueError):
        ReservoirConfig(n_units=10, input_dim=2, avg_degree=2, spectral_radius=0.0)
