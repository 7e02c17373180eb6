"""Physics-informed echo state networks for reconstructing hidden states of chaotic systems."""

from .data import Dataset, add_noise, generate_dataset, load_dataset, save_dataset
from .dynamics import LorenzConstants, PhysicsModel, euler_integrate, lorenz_model, lorenz_rhs, physics_residual
from .harness import EvalReport, evaluate, rmse, run_experiment
from .reservoir import Reservoir, ReservoirConfig, build_reservoir, collect_states, spectral_radius
from .training import Readout, TrainConfig, predict, train

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "EvalReport",
    "LorenzConstants",
    "PhysicsModel",
    "Readout",
    "Reservoir",
    "ReservoirConfig",
    "TrainConfig",
    "add_noise",
    "build_reservoir",
    "collect_states",
    "euler_integrate",
    "evaluate",
    "generate_dataset",
    "load_dataset",
    "lorenz_model",
    "lorenz_rhs",
    "physics_residual",
    "predict",
    "rmse",
    "run_experiment",
    "save_dataset",
    "spectral_radius",
    "train",
]
