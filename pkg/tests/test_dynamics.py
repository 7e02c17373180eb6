import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from piesn.dynamics import (
    LorenzConstants,
    PhysicsModel,
    euler_integrate,
    get_model,
    lorenz_model,
    lorenz_rhs,
    physics_residual,
)
from piesn.errors import DivergenceError, InsufficientLengthError, InvalidStateError


def decay_model():
    return PhysicsModel(
        name="decay",
        state_names=("y",),
        n_observed=1,
        rhs=lambda y: -y,
        jacobian=lambda y: -np.ones(y.shape + (1,)),
    )


def test_lorenz_constants_defaults():
    c = LorenzConstants()
    assert (c.rho, c.sigma) == (28.0, 10.0)
    assert c.beta == 8 / 3
    assert c.lambda_max == 0.934


def test_lorenz_rhs_origin_is_fixed_point():
    assert np.array_equal(lorenz_rhs([0.0, 0.0, 0.0]), np.zeros(3))


def test_lorenz_rhs_nontrivial_fixed_point():
    r = math.sqrt(72.0)
    np.testing.assert_allclose(lorenz_rhs([r, r, 27.0]), np.zeros(3), atol=1e-12)


def test_lorenz_rhs_at_ones():
    np.testing.assert_allclose(lorenz_rhs([1.0, 1.0, 1.0]), [0.0, 26.0, -5.0 / 3.0], rtol=0, atol=1e-15)


@pytest.mark.parametrize("bad", [[np.nan, 0, 0], [0, np.inf, 0], [1.0, 2.0]])
def test_lorenz_rhs_rejects_bad_state(bad):
    with pytest.raises(InvalidStateError):
        lorenz_rhs(bad)


def test_lorenz_jacobian_matches_finite_differences():
    model = lorenz_model()
    y = np.array([3.0, -2.0, 20.0])
    h = 1e-6
    fd = np.column_stack([(model.rhs(y + h * e) - model.rhs(y - h * e)) / (2 * h) for e in np.eye(3)])
    np.testing.assert_allclose(model.jacobian(y), fd, rtol=1e-8, atol=1e-7)


def test_model_split():
    m = lorenz_model()
    assert (m.state_dim, m.observed_dim, m.hidden_dim) == (3, 2, 1)
    assert m.hidden_names == ("phi3",)
    assert get_model("lorenz").parameters["beta"] == 8 / 3
    with pytest.raises(KeyError):
        get_model("duffing")


def test_euler_zero_steps_returns_initial_state():
    y0 = np.array([1.5, -2.0, 7.0])
    traj = euler_integrate(lorenz_model(), y0, 0.01, 0)
    assert traj.shape == (1, 3)
    assert np.array_equal(traj[0], y0)


def test_euler_decay_one_step():
    traj = euler_integrate(decay_model(), [1.0], 0.1, 1)
    assert traj[1, 0] == pytest.approx(0.9, abs=1e-15)


def test_euler_lorenz_one_step():
    traj = euler_integrate(lorenz_model(), [1.0, 1.0, 1.0], 0.01, 1)
    np.testing.assert_allclose(traj[1], [1.0, 1.26, 1.0 - 0.01 * 5.0 / 3.0], rtol=0, atol=1e-15)


def test_euler_divergence_reports_step():
    blowup = PhysicsModel(name="blowup", state_names=("y",), n_observed=1, rhs=lambda y: y**2)
    with pytest.raises(DivergenceError) as info:
        euler_integrate(blowup, [1.0], 1.0, 50)
    # y_k = 1, 2, 6, 42, ... overflows long before step 50
    assert 1 <= info.value.step < 50


def test_euler_rejects_bad_arguments():
    with pytest.raises(ValueError):
        euler_integrate(lorenz_model(), [1.0, 1.0, 1.0], 0.0, 5)
    with pytest.raises(InvalidStateError):
        euler_integrate(lorenz_model(), [1.0, 1.0], 0.01, 5)


def test_residual_of_euler_trajectory_vanishes():
    model = lorenz_model()
    traj = euler_integrate(model, [-10.0, -4.45, 35.1], 0.01, 100)
    res = physics_residual(traj, 0.01, model)
    assert res.shape == (100, 3)
    assert np.max(np.abs(res)) < 1e-10


def test_residual_constant_origin_is_zero():
    res = physics_residual(np.zeros((5, 3)), 0.01, lorenz_model())
    assert np.array_equal(res, np.zeros((4, 3)))


def test_residual_constant_ones():
    res = physics_residual(np.ones((4, 3)), 0.01, lorenz_model())
    np.testing.assert_allclose(res, np.tile([-0.0, -26.0, 5.0 / 3.0], (3, 1)), atol=1e-15)


def test_residual_needs_two_rows():
    with pytest.raises(InsufficientLengthError):
        physics_residual(np.zeros((1, 3)), 0.01, lorenz_model())


def test_fixed_point_trajectory_is_exactly_constant():
    traj = euler_integrate(lorenz_model(), [0.0, 0.0, 0.0], 0.01, 200)
    assert np.array_equal(traj, np.zeros((201, 3)))
    # y = 0 is the root of the decay model
    assert np.array_equal(euler_integrate(decay_model(), [0.0], 0.5, 10), np.zeros((11, 1)))


@settings(max_examples=40, deadline=None)
@given(
    y0=st.tuples(*(st.floats(-20, 20) for _ in range(2)), st.floats(0, 45)),
    dt=st.sampled_from([0.001, 0.005, 0.01]),
)
def test_residual_integrator_adjointness(y0, dt):
    model = lorenz_model()
    traj = euler_integrate(model, y0, dt, 100)
    assert np.max(np.abs(physics_residual(traj, dt, model))) < 1e-10


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-30, 30), min_size=3, max_size=3))
def test_rhs_deterministic(state):
    assert np.array_equal(lorenz_rhs(state), lorenz_rhs(list(state)))
