"""Langevin-noise value learning and deep-exploration experiments.

``BACKEND`` is ``"compiled"`` when the Cython kernels are importable and
``"python"`` otherwise (or when ``DEEPEXPLORE_PURE_PYTHON=1``).
"""

from ._backend import BACKEND
from .agents import (
    AgentConfig,
    EnsembleState,
    QModel,
    ValueAgent,
    bandit_langevin_run,
    default_config,
    dqn_update,
    langevin_dqn_update,
    run_ensemble_value_rl,
    run_greedy_value_rl,
    select_action,
    td_loss,
)
from .checks import dithering_bound_check, posterior_check
from .envs import DeepSea, FourStateMdp, GaussianBandit, generate_flip_mask
from .harness import ExperimentConfig, SweepSummary, emit_plot_data, run_sweep
from .metrics import NOT_REACHED, RunLog, deep_sea_score, learning_time
from .numerics import MlpSpec, forward, init_params, loss_gradient
from .optim import OptimConfig, OptimState, adam_step, langevin_adam_step, langevin_sgd_step, sgd_step
from .replay import Buffer, ObservationTable, Transition, sample_minibatch
from .tabular import TabularQ, run_propagation_demo, tabular_langevin_step, uncertainty_map

__version__ = "0.1.0"
