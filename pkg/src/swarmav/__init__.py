"""Cooperative UAV-swarm collision avoidance via multi-actor learning with a
centralized critic, counterfactual credit assignment, and an execution-time
emergency avoidance filter."""

from .credit import (
    AdvantageMethod,
    advantage,
    coma_advantage,
    maca_advantage,
    mask_agent,
    shapley_advantage,
    verify_baseline_unbiased,
)
from .critic import CriticNet, critic_loss, q_value, td_target
from .eas import EasConfig, emergency_select, predict_distances
from .env import (
    EnvConfig,
    Observation,
    SCENARIOS,
    SwarmEnv,
    WorldState,
    anneal_epsilon,
    check_collision,
    compute_reward,
    observe,
    scenario_config,
    spawn_episode,
    step,
    yaw_from_action,
)
from .evaluate import EnergyModel, Metrics, energy_estimate, evaluate, measure_response_time
from .nn import DenseNet, LayerSpec, OptState, backward, forward, optimizer_update, sync_target
from .policy import GaussianPolicy, act, actor_gradient, log_prob
from .trainer import EpisodeRecord, TrainConfig, Transition, run_episode, train, train_step

__version__ = "0.1.0"
