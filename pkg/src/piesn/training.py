"""Physics-informed readout training.

The readout maps the feature vector ``[x(n); u(n); 1]`` to the full state
estimate ``y_hat(n) = [z_hat(n); h_hat(n)]``. Training minimises

    E_tot = E_d + E_p
    E_d = mean over rows and observed channels of (z_hat - z)^2
    E_p = mean over residual rows and all channels of r^2

with ``r`` the forward-Euler residual of ``y_hat`` (see
:func:`piesn.dynamics.physics_residual`). Observed rows of ``w_out`` start
from a ridge fit of the measurements, hidden rows from a small random guess
(optionally refined by a Gauss-Newton fit of the physics residual), and the
whole matrix is then optimised with full-batch Adam.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np
from scipy import linalg as sla
from scipy import sparse

from .data import Dataset
from .dynamics import PhysicsModel, physics_residual
from .errors import DimensionError, DivergenceError, FormatError, SingularSystemError
from .reservoir import Reservoir, ReservoirConfig, collect_states

__all__ = [
    "TrainConfig",
    "Readout",
    "LossReport",
    "TraceRow",
    "TrainingTrace",
    "Adam",
    "build_features",
    "ridge_init",
    "init_readout",
    "fit_hidden_rows",
    "evaluate_loss",
    "loss_gradient",
    "prepare_training_data",
    "train",
    "predict",
    "save_model",
    "load_model",
    "save_trace",
    "load_trace",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    """Readout training settings.

    ``hidden_init`` selects how the hidden rows are seeded before Adam:
    ``"random"`` keeps the uniform draw, ``"lstsq"`` additionally minimises the
    physics residual over the hidden rows with the observed rows held at their
    ridge values. ``trainable`` restricts Adam to ``"hidden"`` rows (default,
    the observed rows stay at the ridge solution) or lets it move ``"all"`` of
    ``w_out``. ``batch_size=0`` means full batch.
    """

    gamma: float = 1e-6
    learning_rate: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    max_steps: int = 20000
    plateau_window: int = 1000
    plateau_rel_tol: float = 1e-6
    washout: int = 100
    hidden_init_scale: float = 1e-2
    hidden_init: str = "lstsq"
    trainable: str = "hidden"
    batch_size: int = 0
    standardize: bool = False
    trace_every: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.max_steps < 0 or self.plateau_window < 1 or self.trace_every < 1:
            raise ValueError("max_steps, plateau_window and trace_every must be positive")
        if self.washout < 0 or self.batch_size < 0 or self.hidden_init_scale < 0:
            raise ValueError("washout, batch_size and hidden_init_scale must be non-negative")
        if self.hidden_init not in ("random", "lstsq"):
            raise ValueError(f"hidden_init must be 'random' or 'lstsq', got {self.hidden_init!r}")
        if self.trainable not in ("all", "hidden"):
            raise ValueError(f"trainable must be 'all' or 'hidden', got {self.trainable!r}")


@dataclass(frozen=True, eq=False)
class Readout:
    """Linear readout ``w_out`` of shape ``(N_y, N_x + N_u + 1)``.

    ``input_shift``/``input_scale`` are set only when inputs were standardised
    before entering the reservoir; the same transform is applied at predict time.
    """

    w_out: np.ndarray
    n_observed: int
    input_shift: np.ndarray | None = None
    input_scale: np.ndarray | None = None

    @property
    def w_z_out(self) -> np.ndarray:
        return self.w_out[: self.n_observed]

    @property
    def w_h_out(self) -> np.ndarray:
        return self.w_out[self.n_observed :]

    def transform_inputs(self, u: np.ndarray) -> np.ndarray:
        if self.input_shift is None:
            return u
        return (u - self.input_shift) / self.input_scale

    def __call__(self, features: np.ndarray) -> np.ndarray:
        return features @ self.w_out.T


@dataclass(frozen=True)
class LossReport:
    e_d: float
    e_p: float
    e_tot: float


@dataclass(frozen=True)
class TraceRow:
    step: int
    e_d: float
    e_p: float
    e_tot: float


@dataclass
class TrainingTrace:
    rows: list[TraceRow] = field(default_factory=list)
    best_step: int = 0
    best_e_tot: float = math.inf
    initial_e_tot: float = math.nan
    n_steps: int = 0
    stopped_early: bool = False
    threads: int = 1


class Adam:
    """Adam with bias-corrected first and second moment estimates."""

    def __init__(self, shape, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        """Update ``params`` in place."""
        self.t += 1
        self.m *= self.beta1
        self.m += (1.0 - self.beta1) * grad
        self.v *= self.beta2
        self.v += (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        params -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def build_features(states, inputs) -> np.ndarray:
    """Rows ``[x(n), u(n), 1]``."""
    states = np.asarray(states, dtype=float)
    inputs = np.asarray(inputs, dtype=float)
    if states.ndim != 2 or inputs.ndim != 2 or states.shape[0] != inputs.shape[0]:
        raise DimensionError(f"states {states.shape} and inputs {inputs.shape} do not align")
    return np.hstack([states, inputs, np.ones((states.shape[0], 1))])


def ridge_init(features, targets, gamma: float) -> np.ndarray:
    """Tikhonov-regularised least squares ``Z X^T (X X^T + gamma I)^-1``.

    ``features`` is ``(M, F)`` and ``targets`` ``(M, N_z)`` (one row per time
    instant); the result is ``(N_z, F)``.
    """
    x = np.asarray(features, dtype=float)
    z = np.asarray(targets, dtype=float)
    if x.ndim != 2 or z.ndim != 2 or x.shape[0] != z.shape[0] or x.shape[0] < 1:
        raise DimensionError(f"features {x.shape} and targets {z.shape} do not align")
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    gram = x.T @ x
    gram[np.diag_indices_from(gram)] += gamma
    rhs = x.T @ z
    try:
        factor = sla.cho_factor(gram, check_finite=False)
        sol = sla.cho_solve(factor, rhs, check_finite=False)
    except np.linalg.LinAlgError:
        if gamma > 0:
            raise SingularSystemError("ridge system is not positive definite") from None
        try:
            # gamma = 0 on a positive semi-definite system: retry with pivoting LU
            sol = sla.solve(gram, rhs, assume_a="sym")
        except (np.linalg.LinAlgError, sla.LinAlgWarning) as exc:
            raise SingularSystemError(f"singular system with gamma=0: {exc}") from None
    return sol.T


def init_readout(features, observed_targets, config: TrainConfig, n_h: int) -> Readout:
    """Ridge-fit the observed rows and draw the hidden rows uniformly at random."""
    w_z = ridge_init(features, observed_targets, config.gamma)
    rng = np.random.default_rng([config.seed, 7])
    s = config.hidden_init_scale
    w_h = rng.uniform(-s, s, size=(n_h, w_z.shape[1])) if s > 0 else np.zeros((n_h, w_z.shape[1]))
    return Readout(w_out=np.vstack([w_z, w_h]), n_observed=w_z.shape[0])


def _check_shapes(w_out, features, measured, model):
    if w_out.shape != (model.state_dim, features.shape[1]):
        raise DimensionError(f"w_out has shape {w_out.shape}, expected ({model.state_dim}, {features.shape[1]})")
    if measured.shape != (features.shape[0], model.observed_dim):
        raise DimensionError(f"measured has shape {measured.shape}, expected ({features.shape[0]}, {model.observed_dim})")
    if features.shape[0] < 2:
        raise DimensionError("loss needs at least two feature rows")


def _loss_and_grad(w_out, features, measured, dt, model, *, want_grad=True, terms="both", features_t=None):
    nz, ny = model.observed_dim, model.state_dim
    m = features.shape[0]
    # a contiguous (F, M) copy makes the forward product ~2x faster for small N_y
    y = features @ w_out.T if features_t is None else (w_out @ features_t).T
    err = y[:, :nz] - measured
    res = physics_residual(y, dt, model)
    e_d = float(np.sum(err * err)) / (m * nz)
    e_p = float(np.sum(res * res)) / ((m - 1) * ny)
    report = LossReport(e_d=e_d, e_p=e_p, e_tot=e_d + e_p)
    if not want_grad:
        return report, None

    g_y = np.zeros_like(y)
    if terms in ("both", "data"):
        g_y[:, :nz] = (2.0 / (m * nz)) * err
    if terms in ("both", "physics"):
        g_r = (2.0 / ((m - 1) * ny)) * res
        g_y[1:] += g_r / dt
        g_y[:-1] -= g_r / dt
        g_y[:-1] -= np.einsum("nij,ni->nj", model.jacobian(y[:-1]), g_r)
    return report, g_y.T @ features


def evaluate_loss(readout, features, measured, dt: float, model: PhysicsModel) -> LossReport:
    """Data misfit, physics residual and their sum for the given readout."""
    w_out = readout.w_out if isinstance(readout, Readout) else np.asarray(readout, dtype=float)
    features = np.asarray(features, dtype=float)
    measured = np.asarray(measured, dtype=float)
    _check_shapes(w_out, features, measured, model)
    return _loss_and_grad(w_out, features, measured, dt, model, want_grad=False)[0]


def loss_gradient(readout, features, measured, dt: float, model: PhysicsModel, terms: str = "both") -> np.ndarray:
    """Analytic ``dE/dw_out``; ``terms`` picks ``"both"``, ``"data"`` or ``"physics"``."""
    if terms not in ("both", "data", "physics"):
        raise ValueError(f"unknown terms {terms!r}")
    if model.jacobian is None:
        raise ValueError(f"model {model.name!r} has no Jacobian")
    w_out = readout.w_out if isinstance(readout, Readout) else np.asarray(readout, dtype=float)
    features = np.asarray(features, dtype=float)
    measured = np.asarray(measured, dtype=float)
    _check_shapes(w_out, features, measured, model)
    return _loss_and_grad(w_out, features, measured, dt, model, terms=terms)[1]


def _qr_accumulate(r_aug, block):
    stacked = block if r_aug is None else np.vstack([r_aug, block])
    return np.linalg.qr(stacked, mode="r")


def fit_hidden_rows(readout: Readout, features, dt: float, model: PhysicsModel, gamma: float = 0.0,
                    max_iter: int = 5, tol: float = 1e-10) -> Readout:
    """Minimise ``E_p + gamma |w_h|^2`` over the hidden rows, observed rows fixed.

    ``E_d`` does not involve the hidden rows, so this is the best hidden
    readout for the current observed one. Solved by Gauss-Newton on the
    residual (exact in one iteration when ``f`` is affine in the hidden
    components, as for Lorenz) using an incrementally accumulated QR factor.
    """
    x = np.asarray(features, dtype=float)
    nz, ny, nh = model.observed_dim, model.state_dim, model.hidden_dim
    if nh == 0:
        return readout
    f = x.shape[1]
    dx = (x[1:] - x[:-1]) / dt
    x0 = x[:-1]
    w_out = readout.w_out.copy()

    def physics_energy(w):
        r = physics_residual(x @ w.T, dt, model)
        return float(np.sum(r * r)) + gamma * float(np.sum(w[nz:] ** 2))

    energy = physics_energy(w_out)
    for it in range(max_iter):
        y = x @ w_out.T
        res = physics_residual(y, dt, model)
        jac_h = model.jacobian(y[:-1])[:, :, nz:]  # (M-1, N_y, N_h)
        r_aug = None
        for i in range(ny):
            # d res_i / d w_h[k] = [i is hidden k] dx - J[i, nz+k] x0
            cols = []
            for k in range(nh):
                col = -jac_h[:, i, k, None] * x0
                if i == nz + k:
                    col = col + dx
                cols.append(col)
            block = np.hstack(cols + [res[:, i, None]])
            if not np.any(block[:, :-1]):
                continue
            r_aug = _qr_accumulate(r_aug, block)
        if r_aug is None:
            break
        if gamma > 0:
            reg = np.hstack([math.sqrt(gamma) * np.eye(nh * f), math.sqrt(gamma) * w_out[nz:].reshape(-1, 1)])
            r_aug = _qr_accumulate(r_aug, reg)
        n_par = nh * f
        r_mat, rhs = r_aug[:n_par, :n_par], r_aug[:n_par, n_par]
        if np.any(np.abs(np.diag(r_mat)) < 1e-300):
            raise SingularSystemError("hidden-row least-squares system is rank deficient")
        delta = -sla.solve_triangular(r_mat, rhs)
        candidate = w_out.copy()
        candidate[nz:] += delta.reshape(nh, f)
        new_energy = physics_energy(candidate)
        if not new_energy <= energy:
            break
        w_out, energy = candidate, new_energy
        if np.linalg.norm(delta) <= tol * max(1.0, np.linalg.norm(w_out[nz:])):
            break
    return replace(readout, w_out=w_out)


@dataclass(frozen=True)
class TrainingData:
    """Washout-trimmed design matrix and targets, ready for the readout.

    ``inputs`` and ``states`` keep all ``N_t - 1`` rows; ``features`` and
    ``targets`` start after the washout. Row ``k`` of the full arrays refers to
    time index ``k + 1``.
    """

    inputs: np.ndarray
    states: np.ndarray
    features: np.ndarray
    targets: np.ndarray
    washout: int


def _input_transform(measured: np.ndarray, standardize: bool):
    if not standardize:
        return None, None
    shift = measured.mean(axis=0)
    scale = measured.std(axis=0)
    scale[scale == 0] = 1.0
    return shift, scale


def prepare_training_data(reservoir: Reservoir, dataset: Dataset, washout: int,
                          input_shift=None, input_scale=None) -> TrainingData:
    """Teacher-force the reservoir with ``u(n) = z(n-1)`` and drop the washout rows."""
    measured = dataset.measured
    if washout >= dataset.n_samples - 2:
        raise ValueError(f"washout {washout} leaves fewer than two rows of {dataset.n_samples} samples")
    u = measured[:-1]
    if input_shift is not None:
        u = (u - input_shift) / input_scale
    states = collect_states(reservoir, u)
    feats = build_features(states, u)
    return TrainingData(
        inputs=u,
        states=states,
        features=np.ascontiguousarray(feats[washout:]),
        targets=np.ascontiguousarray(measured[1:][washout:]),
        washout=washout,
    )


def _thread_count() -> int:
    try:
        from threadpoolctl import threadpool_info

        counts = [p.get("num_threads", 1) for p in threadpool_info() if p.get("user_api") == "blas"]
        return max(counts) if counts else 1
    except Exception:  # pragma: no cover - threadpoolctl is optional
        return int(os.environ.get("OMP_NUM_THREADS", 1))


def train(reservoir: Reservoir, dataset: Dataset, model: PhysicsModel, config: TrainConfig,
          data: TrainingData | None = None) -> tuple[Readout, TrainingTrace]:
    """Fit the readout on ``dataset`` and return the best readout seen plus a trace.

    Measured (noisy, when present) observations drive the reservoir and serve
    as the data targets; the hidden columns of ``dataset`` are never read.

    Raises:
        DivergenceError: if the loss becomes non-finite.
    """
    if dataset.n_observed != model.observed_dim or dataset.state_dim != model.state_dim:
        raise DimensionError("dataset and model disagree on the observed/hidden split")
    if dataset.n_samples < config.washout + 3:
        raise ValueError(f"dataset has {dataset.n_samples} samples, need at least washout + 3")
    shift, scale = _input_transform(dataset.measured, config.standardize)
    if data is None:
        data = prepare_training_data(reservoir, dataset, config.washout, shift, scale)
    feats, targets, dt = data.features, data.targets, dataset.dt
    feats_t = np.ascontiguousarray(feats.T)

    readout = init_readout(feats, targets, config, model.hidden_dim)
    readout = replace(readout, input_shift=shift, input_scale=scale)
    if config.hidden_init == "lstsq":
        readout = fit_hidden_rows(readout, feats, dt, model, gamma=config.gamma)

    w = readout.w_out.copy()
    opt = Adam(w.shape, config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_epsilon)
    mask = None
    if config.trainable == "hidden":
        mask = np.zeros_like(w)
        mask[model.observed_dim :] = 1.0
    rng = np.random.default_rng([config.seed, 11])
    minibatch = 0 < config.batch_size < feats.shape[0]

    trace = TrainingTrace(threads=_thread_count())
    best_w = w.copy()
    history: list[float] = []  # best E_tot at each bookkeeping checkpoint
    check_every = config.trace_every if minibatch else 1
    window = max(1, config.plateau_window // check_every)

    step = 0
    while True:
        if minibatch:
            start = int(rng.integers(0, feats.shape[0] - config.batch_size + 1))
            sl = slice(start, start + config.batch_size)
            _, grad = _loss_and_grad(w, feats[sl], targets[sl], dt, model)
            checkpoint = step % check_every == 0 or step == config.max_steps
            report = None
            if checkpoint:
                report = _loss_and_grad(w, feats, targets, dt, model, want_grad=False, features_t=feats_t)[0]
        else:
            report, grad = _loss_and_grad(w, feats, targets, dt, model, features_t=feats_t)
            checkpoint = True

        if report is not None:
            if not math.isfinite(report.e_tot):
                raise DivergenceError("training loss became non-finite", step=step)
            if step == 0:
                trace.initial_e_tot = report.e_tot
            if report.e_tot < trace.best_e_tot:
                trace.best_e_tot, trace.best_step = report.e_tot, step
                best_w[...] = w
            if step % config.trace_every == 0 or step == config.max_steps:
                trace.rows.append(TraceRow(step, report.e_d, report.e_p, report.e_tot))
            history.append(trace.best_e_tot)
        if not np.all(np.isfinite(grad)):
            raise DivergenceError("training gradient became non-finite", step=step)

        if step >= config.max_steps:
            break
        if checkpoint and len(history) > window:
            old = history[-1 - window]
            if old - history[-1] < config.plateau_rel_tol * abs(old):
                trace.stopped_early = True
                if trace.rows[-1].step != step:
                    trace.rows.append(TraceRow(step, report.e_d, report.e_p, report.e_tot))
                break

        if mask is not None:
            grad = grad * mask
        opt.step(w, grad)
        step += 1

    trace.n_steps = step
    log.info("trained %d steps, best E_tot %.6g at step %d", step, trace.best_e_tot, trace.best_step)
    return replace(readout, w_out=best_w), trace


@dataclass(frozen=True)
class Prediction:
    """Readout output aligned with the input rows; ``burn_in`` flags washout rows."""

    observed: np.ndarray
    hidden: np.ndarray
    burn_in: np.ndarray


def predict(readout: Readout, reservoir: Reservoir, inputs, x0=None, washout: int = 0) -> Prediction:
    """Teacher-forced prediction of measured and hidden states for raw ``inputs``."""
    inputs = np.asarray(inputs, dtype=float)
    u = readout.transform_inputs(inputs)
    states = collect_states(reservoir, u, x0)
    feats = build_features(states, u)
    if readout.w_out.shape[1] != feats.shape[1]:
        raise DimensionError(f"readout expects {readout.w_out.shape[1]} features, got {feats.shape[1]}")
    y = readout(feats)
    burn = np.zeros(len(y), dtype=bool)
    burn[:washout] = True
    return Prediction(observed=y[:, : readout.n_observed], hidden=y[:, readout.n_observed :], burn_in=burn)


# --- persistence -----------------------------------------------------------

def _fmt(v) -> str:
    return "%.17g" % v


def _fmt_vec(v) -> str:
    return "none" if v is None else ";".join(_fmt(x) for x in v)


def _parse_vec(s: str):
    return None if s == "none" else np.array([float(x) for x in s.split(";")])


def save_model(path, reservoir: Reservoir, readout: Readout, config: TrainConfig, model_name: str,
               extra: dict | None = None) -> None:
    """Write reservoir, readout and every configuration field to a text file."""
    lines = ["# piesn model v1", f"model={model_name}"]
    for key, value in asdict(reservoir.config).items():
        lines.append(f"reservoir.{key}={value}")
    for key, value in asdict(config).items():
        lines.append(f"train.{key}={value}")
    lines += [
        f"state_dim={readout.w_out.shape[0]}",
        f"n_observed={readout.n_observed}",
        f"n_features={readout.w_out.shape[1]}",
        f"input_shift={_fmt_vec(readout.input_shift)}",
        f"input_scale={_fmt_vec(readout.input_scale)}",
    ]
    for key, value in (extra or {}).items():
        lines.append(f"extra.{key}={value}")
    for name, mat in (("W_IN", reservoir.w_in), ("W", reservoir.w)):
        coo = sparse.coo_matrix(mat)
        order = np.lexsort((coo.col, coo.row))
        lines.append(name)
        lines += [f"{coo.row[i]},{coo.col[i]},{_fmt(coo.data[i])}" for i in order]
        lines.append("")
    lines.append("W_OUT")
    lines += [",".join(_fmt(v) for v in row) for row in readout.w_out]
    lines.append("")
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def _coerce(cls, values: dict[str, str], path):
    out = {}
    for f in fields(cls):
        if f.name not in values:
            raise FormatError(f"model header lacks {f.name}", path=path)
        raw = values[f.name]
        typ = f.type if isinstance(f.type, str) else f.type.__name__
        if typ == "bool":
            out[f.name] = raw == "True"
        elif typ == "int":
            out[f.name] = int(raw)
        elif typ == "float":
            out[f.name] = float(raw)
        else:
            out[f.name] = raw
    return cls(**out)


def load_model(path) -> tuple[Reservoir, Readout, TrainConfig, str, dict]:
    """Inverse of :func:`save_model`: ``(reservoir, readout, config, model_name, extra)``."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    header: dict[str, str] = {}
    i = 0
    if not lines or not lines[0].startswith("# piesn model"):
        raise FormatError("not a piesn model file", line=1, path=path)
    i = 1
    while i < len(lines) and lines[i] not in ("W_IN", "W", "W_OUT"):
        key, sep, value = lines[i].partition("=")
        if not sep:
            raise FormatError(f"malformed header line {lines[i]!r}", line=i + 1, path=path)
        header[key] = value
        i += 1

    sections: dict[str, list[list[str]]] = {}
    section_start: dict[str, int] = {}
    while i < len(lines):
        name = lines[i]
        if name not in ("W_IN", "W", "W_OUT"):
            if name == "":
                i += 1
                continue
            raise FormatError(f"unexpected section {name!r}", line=i + 1, path=path)
        section_start[name] = i + 2
        i += 1
        rows = []
        while i < len(lines) and lines[i] != "":
            rows.append(lines[i].split(","))
            i += 1
        sections[name] = rows
    for name in ("W_IN", "W", "W_OUT"):
        if name not in sections:
            raise FormatError(f"missing section {name}", path=path)

    try:
        rcfg = _coerce(ReservoirConfig, {k[10:]: v for k, v in header.items() if k.startswith("reservoir.")}, path)
        tcfg = _coerce(TrainConfig, {k[6:]: v for k, v in header.items() if k.startswith("train.")}, path)
        ny, nz, nf = int(header["state_dim"]), int(header["n_observed"]), int(header["n_features"])
        shift, scale = _parse_vec(header["input_shift"]), _parse_vec(header["input_scale"])
        model_name = header["model"]
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad model header: {exc}", path=path) from None

    def triplets(name, shape):
        rows = sections[name]
        try:
            r = np.array([int(t[0]) for t in rows], dtype=int)
            c = np.array([int(t[1]) for t in rows], dtype=int)
            v = np.array([float(t[2]) for t in rows])
        except (ValueError, IndexError):
            raise FormatError(f"bad triplet in section {name}", line=section_start[name], path=path) from None
        return sparse.csr_matrix((v, (r, c)), shape=shape)

    w_in = triplets("W_IN", (rcfg.n_units, rcfg.input_dim + 1))
    w = triplets("W", (rcfg.n_units, rcfg.n_units))
    try:
        w_out = np.array([[float(v) for v in row] for row in sections["W_OUT"]])
    except ValueError:
        raise FormatError("non-numeric W_OUT entry", line=section_start["W_OUT"], path=path) from None
    if w_out.shape != (ny, nf):
        raise FormatError(f"W_OUT has shape {w_out.shape}, header says ({ny}, {nf})", path=path)
    extra = {k[6:]: v for k, v in header.items() if k.startswith("extra.")}
    return (
        Reservoir(w_in=w_in, w=w, config=rcfg),
        Readout(w_out=w_out, n_observed=nz, input_shift=shift, input_scale=scale),
        tcfg,
        model_name,
        extra,
    )


def save_trace(path, trace: TrainingTrace) -> None:
    with open(path, "w") as fh:
        fh.write(
            f"# threads={trace.threads} best_step={trace.best_step} n_steps={trace.n_steps} "
            f"stopped_early={trace.stopped_early}\n"
        )
        fh.write("step,e_d,e_p,e_tot\n")
        for row in trace.rows:
            fh.write(f"{row.step},{_fmt(row.e_d)},{_fmt(row.e_p)},{_fmt(row.e_tot)}\n")


def load_trace(path) -> list[TraceRow]:
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln and not ln.startswith("#")]
    return [TraceRow(int(s), float(a), float(b), float(c))
            for s, a, b, c in (ln.split(",") for ln in lines[1:])]
