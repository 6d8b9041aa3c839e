"""Deep Q-learning with SGD, SVRG and stochastic recursive gradient optimizers."""

from .config import ExperimentSpec, TaskConfig, load_config
from .env import EnvState, make_task
from .optim import (
    AdamState,
    EpochInputs,
    EpochReport,
    adam_process,
    bellman_target,
    eta_max_bound,
    full_batch_gradient,
    sarah_epoch,
    sgd_epoch,
    svrg_epoch,
    td_gradient,
)
from .qnet import Layout, ParamVector, forward, init_params, q_grad
from .replay import ReplayBuffer, Transition, TransitionBatch
from .trainer import RunResult, epsilon_schedule, run_training, select_action

__version__ = "0.1.0"
