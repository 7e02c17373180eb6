"""Governing equations, explicit Euler integration and the discrete physics residual.

A :class:`PhysicsModel` bundles the right-hand side ``f`` of an autonomous ODE
``dy/dt = f(y)`` together with the split of the state into measured components
(first ``n_observed`` entries) and hidden components (the rest).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import DimensionError, DivergenceError, InsufficientLengthError, InvalidStateError

__all__ = [
    "LorenzConstants",
    "PhysicsModel",
    "lorenz_rhs",
    "lorenz_model",
    "euler_integrate",
    "physics_residual",
    "get_model",
    "register_model",
]


@dataclass(frozen=True)
class LorenzConstants:
    rho: float = 28.0
    sigma: float = 10.0
    beta: float = 8.0 / 3.0
    # largest Lyapunov exponent, only used to rescale time axes in reports
    lambda_max: float = 0.934


@dataclass(frozen=True)
class PhysicsModel:
    """Right-hand side of ``dy/dt = f(y)`` with an observed/hidden split.

    Attributes:
        name: registry key, e.g. ``"lorenz"``.
        state_names: one label per state component, observed components first.
        n_observed: number of leading components that are measured.
        rhs: vectorised map ``(..., N_y) -> (..., N_y)``.
        jacobian: vectorised map ``(..., N_y) -> (..., N_y, N_y)`` with
            ``J[..., i, j] = df_i/dy_j``. Needed for training.
        parameters: named constants, echoed in reports.
        lambda_max: optional largest Lyapunov exponent for time normalisation.
    """

    name: str
    state_names: tuple[str, ...]
    n_observed: int
    rhs: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    jacobian: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    parameters: Mapping[str, float] = field(default_factory=dict)
    lambda_max: float | None = None

    def __post_init__(self):
        if len(self.state_names) < 1:
            raise ValueError("model needs at least one state component")
        if not 1 <= self.n_observed <= len(self.state_names):
            raise ValueError(
                f"n_observed must lie in [1, {len(self.state_names)}], got {self.n_observed}"
            )

    @property
    def state_dim(self) -> int:
        return len(self.state_names)

    @property
    def observed_dim(self) -> int:
        return self.n_observed

    @property
    def hidden_dim(self) -> int:
        return self.state_dim - self.n_observed

    @property
    def observed_names(self) -> tuple[str, ...]:
        return self.state_names[: self.n_observed]

    @property
    def hidden_names(self) -> tuple[str, ...]:
        return self.state_names[self.n_observed :]


def _lorenz_rhs_rows(y: np.ndarray, c: LorenzConstants) -> np.ndarray:
    p1, p2, p3 = y[..., 0], y[..., 1], y[..., 2]
    return np.stack(
        (c.sigma * (p2 - p1), p1 * (c.rho - p3) - p2, p1 * p2 - c.beta * p3), axis=-1
    )


def _lorenz_jacobian_rows(y: np.ndarray, c: LorenzConstants) -> np.ndarray:
    p1, p2, p3 = y[..., 0], y[..., 1], y[..., 2]
    jac = np.zeros(y.shape + (3,), dtype=float)
    jac[..., 0, 0] = -c.sigma
    jac[..., 0, 1] = c.sigma
    jac[..., 1, 0] = c.rho - p3
    jac[..., 1, 1] = -1.0
    jac[..., 1, 2] = -p1
    jac[..., 2, 0] = p2
    jac[..., 2, 1] = p1
    jac[..., 2, 2] = -c.beta
    return jac


def lorenz_rhs(state, constants: LorenzConstants = LorenzConstants()) -> np.ndarray:
    """Time derivative of the Lorenz system at a single state ``(phi1, phi2, phi3)``."""
    y = np.asarray(state, dtype=float)
    if y.shape != (3,):
        raise InvalidStateError(f"Lorenz state must have 3 components, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise InvalidStateError(f"non-finite Lorenz state {y.tolist()}")
    return _lorenz_rhs_rows(y, constants)


def lorenz_model(constants: LorenzConstants = LorenzConstants(), n_observed: int = 2) -> PhysicsModel:
    """Lorenz system with ``phi1, phi2`` measured and ``phi3`` hidden by default."""
    return PhysicsModel(
        name="lorenz",
        state_names=("phi1", "phi2", "phi3"),
        n_observed=n_observed,
        rhs=lambda y: _lorenz_rhs_rows(y, constants),
        jacobian=lambda y: _lorenz_jacobian_rows(y, constants),
        parameters={"rho": constants.rho, "sigma": constants.sigma, "beta": constants.beta},
        lambda_max=constants.lambda_max,
    )


_REGISTRY: dict[str, Callable[[], PhysicsModel]] = {"lorenz": lorenz_model}


def register_model(name: str, factory: Callable[[], PhysicsModel]) -> None:
    _REGISTRY[name] = factory


def get_model(name: str) -> PhysicsModel:
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise KeyError(f"unknown model {name!r}; known: {sorted(_REGISTRY)}") from None


def euler_integrate(model: PhysicsModel, y0, dt: float, n_steps: int) -> np.ndarray:
    """Integrate with forward Euler, returning ``n_steps + 1`` rows starting at ``y0``.

    Raises:
        DivergenceError: if a non-finite value appears; ``step`` is the index
            of the offending row.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if n_steps < 0:
        raise ValueError(f"n_steps must be non-negative, got {n_steps}")
    y = np.asarray(y0, dtype=float)
    if y.shape != (model.state_dim,):
        raise InvalidStateError(f"y0 must have shape ({model.state_dim},), got {y.shape}")
    if not np.all(np.isfinite(y)):
        raise InvalidStateError("y0 contains non-finite values")

    traj = np.empty((n_steps + 1, model.state_dim))
    traj[0] = y
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n_steps):
            y = y + dt * model.rhs(y)
            if not np.all(np.isfinite(y)):
                raise DivergenceError("Euler integration diverged", step=k + 1)
            traj[k + 1] = y
    return traj


def physics_residual(y_hat, dt: float, model: PhysicsModel) -> np.ndarray:
    """Forward-difference residual ``(y[n+1] - y[n]) / dt - f(y[n])``.

    The residual has one row fewer than ``y_hat``; the final sample has no
    successor and hence no residual row. It vanishes (up to rounding) on any
    trajectory produced by :func:`euler_integrate` with the same ``dt``.
    """
    y_hat = np.asarray(y_hat, dtype=float)
    if y_hat.ndim != 2 or y_hat.shape[1] != model.state_dim:
        raise DimensionError(f"expected (M, {model.state_dim}) trajectory, got {y_hat.shape}")
    if y_hat.shape[0] < 2:
        raise InsufficientLengthError("physics residual needs at least two samples")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    return (y_hat[1:] - y_hat[:-1]) / dt - model.rhs(y_hat[:-1])
