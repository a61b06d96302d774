"""Learn vector fields from noisy time series with a network inside a Runge-Kutta stepper,
jointly estimating the per-sample measurement noise."""
from .corrupt import NoisyDataset, add_gaussian_noise, add_student_t_noise, smooth_initial_noise
from .integrate import Trajectory, implicit_midpoint_simulate, rk4_simulate
from .loss import LossConfig, WindowedObjective, loss_gradient, loss_multi, loss_value
from .network import MlpParams, mlp_forward, xavier_init
from .optimize import OptimizerOptions, lbfgs_minimize
from .stepper import EULER, KUTTA3, RK4, FlowModel, RkTableau
from .train import TrainedModel, fit

__all__ = [
    "NoisyDataset", "add_gaussian_noise", "add_student_t_noise", "smooth_initial_noise",
    "Trajectory", "implicit_midpoint_simulate", "rk4_simulate",
    "LossConfig", "WindowedObjective", "loss_gradient", "loss_multi", "loss_value",
    "MlpParams", "mlp_forward", "xavier_init", "OptimizerOptions", "lbfgs_minimize",
    "EULER", "KUTTA3", "RK4", "FlowModel", "RkTableau", "TrainedModel", "fit",
]
__version__ = "0.1.0"
