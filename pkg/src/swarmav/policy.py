"""Per-agent actor networks with a Gaussian stochastic-policy interpretation.

The actor maps one agent's local observation through two 256-wide ReLU layers
to a tanh head, giving a deterministic action mean in (-1, 1). For training,
that mean parameterizes a fixed-width Gaussian: the policy density is
N(mean(obs), sigma^2) with sigma matched to the exploration noise scale. This
is the interpretive bridge between a tanh actor and log-probability policy
gradients, and it is deliberate: log densities and their gradients stay well
defined while execution stays deterministic (the mean).

Log-probabilities are always evaluated at the pre-clamp sampled action; the
clamped copy is what the environment executes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import nn

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def build_actor_net(
    obs_width: int,
    rng: np.random.Generator | None = None,
    hidden_width: int = 256,
    init: str = "fan_in",
) -> nn.DenseNet:
    return nn.DenseNet(
        [
            nn.LayerSpec(obs_width, hidden_width, "relu"),
            nn.LayerSpec(hidden_width, hidden_width, "relu"),
            nn.LayerSpec(hidden_width, 1, "tanh"),
        ],
        rng=rng,
        init=init,
    )


@dataclass
class GaussianPolicy:
    """Actor network plus the fixed standard deviation of its action density."""

    actor: nn.DenseNet
    sigma: float = 0.1
    obs_scale: np.ndarray | None = None

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.obs_scale is not None:
            self.obs_scale = np.asarray(self.obs_scale, dtype=float)
            if self.obs_scale.shape != (self.actor.in_width,):
                raise ValueError(
                    f"obs_scale shape {self.obs_scale.shape} != ({self.actor.in_width},)"
                )

    def _scaled(self, obs: np.ndarray) -> np.ndarray:
        obs = np.asarray(obs, dtype=float)
        return obs if self.obs_scale is None else obs / self.obs_scale

    def mean_action(self, obs: np.ndarray) -> float:
        out, _ = nn.forward(self.actor, self._scaled(obs))
        return float(out[0])

    def mean_actions(self, obs_batch: np.ndarray) -> np.ndarray:
        out, _ = nn.forward(self.actor, self._scaled(obs_batch))
        return out[:, 0]

    def forward_with_tape(self, obs: np.ndarray):
        return nn.forward(self.actor, self._scaled(obs))


def act(
    policy: GaussianPolicy,
    obs: np.ndarray,
    explore: bool,
    epsilon: float,
    rng: np.random.Generator | None = None,
) -> float:
    """Executed action: the mean, plus (with probability epsilon when exploring)
    Gaussian noise of std sigma, clamped to [-1, 1]."""
    action, _ = sample_action(policy, obs, explore, epsilon, rng)
    return action


def sample_action(
    policy: GaussianPolicy,
    obs: np.ndarray,
    explore: bool,
    epsilon: float,
    rng: np.random.Generator | None = None,
) -> tuple[float, float]:
    """Returns (executed, raw): the clamped action the environment sees and the
    pre-clamp sample the log-density is evaluated at. Without exploration the
    two coincide with the mean."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    raw = policy.mean_action(obs)
    if explore and epsilon > 0.0:
        if rng is None:
            raise ValueError("exploration requires an rng")
        if rng.random() < epsilon:
            raw = raw + policy.sigma * rng.standard_normal()
    return max(-1.0, min(1.0, raw)), raw


def log_prob(policy: GaussianPolicy, obs: np.ndarray, action: float) -> float:
    """Gaussian log density of action under mean(obs) and the fixed sigma."""
    mu = policy.mean_action(obs)
    z = (action - mu) / policy.sigma
    return -0.5 * z * z - math.log(policy.sigma) - LOG_SQRT_2PI


def log_prob_grad(policy: GaussianPolicy, obs: np.ndarray, action: float) -> list[np.ndarray]:
    """Exact gradient of log_prob w.r.t. the actor parameters.

    d logp / d mu = (action - mu) / sigma^2, chained through the mean network.
    """
    out, tape = policy.forward_with_tape(obs)
    mu = float(out[0])
    dmu = (action - mu) / (policy.sigma**2)
    grads, _ = nn.backward(tape, np.array([dmu]))
    return grads


def actor_gradient(
    policy: GaussianPolicy, obs: np.ndarray, action: float, advantage: float
) -> list[np.ndarray]:
    """Policy-gradient contribution of one transition:
    grad log_prob(obs, action) scaled by the advantage."""
    if not math.isfinite(advantage):
        raise ValueError(f"non-finite advantage {advantage!r}")
    out, tape = policy.forward_with_tape(obs)
    mu = float(out[0])
    dmu = advantage * (action - mu) / (policy.sigma**2)
    grads, _ = nn.backward(tape, np.array([dmu]))
    return grads


def actor_gradient_batch(
    policy: GaussianPolicy,
    obs_batch: np.ndarray,
    actions: np.ndarray,
    advantages: np.ndarray,
) -> list[np.ndarray]:
    """Mean over transitions of the per-sample policy gradients."""
    obs_batch = np.asarray(obs_batch, dtype=float)
    actions = np.asarray(actions, dtype=float)
    advantages = np.asarray(advantages, dtype=float)
    if not np.all(np.isfinite(advantages)):
        raise ValueError("non-finite advantages in batch")
    n = obs_batch.shape[0]
    out, tape = policy.forward_with_tape(obs_batch)
    mu = out[:, 0]
    dmu = advantages * (actions - mu) / (policy.sigma**2) / n
    grads, _ = nn.backward(tape, dmu[:, None])
    return grads
