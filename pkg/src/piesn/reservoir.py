"""Fixed random reservoir: input/recurrent matrix construction and teacher-forced state updates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from .errors import DegenerateMatrixError, DimensionError, NumericError

__all__ = [
    "ReservoirConfig",
    "Reservoir",
    "build_input_matrix",
    "build_recurrent_matrix",
    "build_reservoir",
    "spectral_radius",
    "advance",
    "collect_states",
]

DENSE_EIG_LIMIT = 1200
# largest double below 1; tanh saturates to exactly +-1.0 for |arg| > ~19
_TANH_BOUND = np.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class ReservoirConfig:
    n_units: int
    input_dim: int
    sigma_in: float = 1.0
    spectral_radius: float = 1.0
    avg_degree: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.n_units < 1 or self.input_dim < 1:
            raise ValueError("n_units and input_dim must be positive")
        if self.sigma_in < 0:
            raise ValueError("sigma_in must be non-negative")
        if not self.spectral_radius > 0:
            raise ValueError("spectral_radius must be positive")
        if not 1 <= self.avg_degree <= self.n_units:
            raise ValueError(f"avg_degree must lie in [1, n_units={self.n_units}], got {self.avg_degree}")


@dataclass(frozen=True, eq=False)
class Reservoir:
    """Input matrix ``w_in`` (last column multiplies the bias 1) and recurrent matrix ``w``."""

    w_in: sparse.csr_matrix
    w: sparse.csr_matrix
    config: ReservoirConfig

    @property
    def n_units(self) -> int:
        return self.w.shape[0]

    @property
    def input_dim(self) -> int:
        return self.w_in.shape[1] - 1


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream])


def build_input_matrix(config: ReservoirConfig) -> sparse.csr_matrix:
    """One nonzero per row, at a uniform column, drawn from U[-sigma_in, sigma_in]."""
    rng = _rng(config.seed, 0)
    n, m = config.n_units, config.input_dim + 1
    cols = rng.integers(0, m, size=n)
    vals = rng.uniform(-config.sigma_in, config.sigma_in, size=n)
    w_in = sparse.csr_matrix((vals, (np.arange(n), cols)), shape=(n, m))
    w_in.eliminate_zeros()
    return w_in


def spectral_radius(m) -> float:
    """Largest eigenvalue modulus of a square matrix.

    Dense eigendecomposition up to ``DENSE_EIG_LIMIT`` rows, implicitly
    restarted Arnoldi (ARPACK) above that.
    """
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"spectral radius needs a square matrix, got {m.shape}")
    n = m.shape[0]
    if n == 0:
        return 0.0
    if n <= DENSE_EIG_LIMIT:
        dense = m.toarray() if sparse.issparse(m) else np.asarray(m, dtype=float)
        if not np.all(np.isfinite(dense)):
            raise NumericError("matrix has non-finite entries")
        try:
            eigs = np.linalg.eigvals(dense)
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"eigenvalue solver failed: {exc}") from exc
        return float(np.max(np.abs(eigs)))
    try:
        vals = splinalg.eigs(sparse.csr_matrix(m, dtype=float), k=1, which="LM", tol=1e-10,
                             return_eigenvectors=False, v0=np.ones(n))
    except splinalg.ArpackNoConvergence as exc:
        raise NumericError(f"ARPACK did not converge: {exc}") from exc
    return float(np.abs(vals[0]))


def _raw_recurrent(config: ReservoirConfig) -> sparse.csr_matrix:
    rng = _rng(config.seed, 1)
    n, d = config.n_units, config.avg_degree
    cols = np.concatenate([rng.choice(n, size=d, replace=False) for _ in range(n)])
    rows = np.repeat(np.arange(n), d)
    vals = rng.uniform(-1.0, 1.0, size=n * d)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


def build_recurrent_matrix(config: ReservoirConfig) -> sparse.csr_matrix:
    """Exactly ``avg_degree`` U[-1, 1] entries per row, rescaled to the target spectral radius."""
    raw = _raw_recurrent(config)
    radius = spectral_radius(raw)
    if radius < 1e-12:
        raise DegenerateMatrixError(
            f"raw recurrent matrix has spectral radius {radius:.3g}; choose another seed"
        )
    w = raw * (config.spectral_radius / radius)
    achieved = spectral_radius(w)
    if abs(achieved - config.spectral_radius) > 1e-6 * config.spectral_radius:
        raise NumericError(f"rescaled spectral radius {achieved} misses target {config.spectral_radius}")
    return w.tocsr()


def build_reservoir(config: ReservoirConfig) -> Reservoir:
    return Reservoir(w_in=build_input_matrix(config), w=build_recurrent_matrix(config), config=config)


def _drive(reservoir: Reservoir, u: np.ndarray) -> np.ndarray:
    """``W_in [u; 1]`` for one input (1-D) or a batch of inputs (rows)."""
    w_in = reservoir.w_in
    if u.ndim == 1:
        return w_in[:, :-1] @ u + w_in[:, -1].toarray().ravel()
    return (w_in[:, :-1] @ u.T).T + w_in[:, -1].toarray().ravel()


def _check_inputs(reservoir: Reservoir, u: np.ndarray) -> None:
    if u.shape[-1] != reservoir.input_dim:
        raise DimensionError(f"input has {u.shape[-1]} components, reservoir expects {reservoir.input_dim}")


def advance(x_prev, u, reservoir: Reservoir) -> np.ndarray:
    """One reservoir update ``tanh(W_in [u; 1] + W x_prev)``."""
    x_prev = np.asarray(x_prev, dtype=float)
    u = np.asarray(u, dtype=float)
    if x_prev.shape != (reservoir.n_units,):
        raise DimensionError(f"state has shape {x_prev.shape}, expected ({reservoir.n_units},)")
    if u.ndim != 1:
        raise DimensionError("advance takes a single input vector")
    _check_inputs(reservoir, u)
    return _step(reservoir.w, _drive(reservoir, u), x_prev)


def _step(w, drive: np.ndarray, x_prev: np.ndarray) -> np.ndarray:
    return np.clip(np.tanh(drive + w @ x_prev), -_TANH_BOUND, _TANH_BOUND)


def collect_states(reservoir: Reservoir, inputs, x0=None) -> np.ndarray:
    """Teacher-forced reservoir states, one row per input row.

    Row ``n`` is the state after consuming ``inputs[n]``; the reservoir is
    driven only by the given inputs, never by its own readout.
    """
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim != 2:
        raise DimensionError(f"inputs must be 2-D, got shape {inputs.shape}")
    _check_inputs(reservoir, inputs)
    x = np.zeros(reservoir.n_units) if x0 is None else np.asarray(x0, dtype=float)
    if x.shape != (reservoir.n_units,):
        raise DimensionError(f"x0 has shape {x.shape}, expected ({reservoir.n_units},)")
    drive = _drive(reservoir, inputs)
    w = reservoir.w
    states = np.empty((inputs.shape[0], reservoir.n_units))
    for n in range(inputs.shape[0]):
        x = _step(w, drive[n], x)
        states[n] = x
    return states
