"""Centralized action-value network over joint observations and joint actions.

The critic projects the concatenated joint observation and the joint action
through two parallel 32-wide linear layers, concatenates the projections into
a 64-wide feature, and scores it with a two-layer 256-wide ReLU trunk ending
in a scalar head. Training minimizes squared one-step temporal-difference
error against a hard-synced target network; the target side of the loss never
receives gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn


class CriticNet:
    """Q(joint_obs, joint_act) with split input projections.

    obs_scale, when given, divides the observation input componentwise before
    the projection; it is a fixed normalization, not a parameter.
    """

    def __init__(
        self,
        joint_obs_width: int,
        n_agents: int,
        rng: np.random.Generator | None = None,
        proj_width: int = 32,
        hidden_width: int = 256,
        obs_scale: np.ndarray | None = None,
        init: str = "fan_in",
    ):
        if rng is None:
            rng = np.random.default_rng()
        self.joint_obs_width = joint_obs_width
        self.n_agents = n_agents
        self.obs_proj = nn.DenseNet(
            [nn.LayerSpec(joint_obs_width, proj_width, "identity")], rng=rng, init=init
        )
        self.act_proj = nn.DenseNet(
            [nn.LayerSpec(n_agents, proj_width, "identity")], rng=rng, init=init
        )
        self.trunk = nn.DenseNet(
            [
                nn.LayerSpec(2 * proj_width, hidden_width, "relu"),
                nn.LayerSpec(hidden_width, hidden_width, "relu"),
                nn.LayerSpec(hidden_width, 1, "identity"),
            ],
            rng=rng,
            init=init,
        )
        if obs_scale is not None:
            obs_scale = np.asarray(obs_scale, dtype=float)
            if obs_scale.shape != (joint_obs_width,):
                raise ValueError(
                    f"obs_scale shape {obs_scale.shape} != ({joint_obs_width},)"
                )
        self.obs_scale = obs_scale

    def parameters(self) -> list[np.ndarray]:
        return (
            self.obs_proj.parameters()
            + self.act_proj.parameters()
            + self.trunk.parameters()
        )

    def mark_updated(self) -> None:
        self.obs_proj.mark_updated()
        self.act_proj.mark_updated()
        self.trunk.mark_updated()

    def _check_widths(self, joint_obs: np.ndarray, joint_act: np.ndarray) -> None:
        if joint_obs.shape[-1] != self.joint_obs_width:
            raise ValueError(
                f"joint_obs width {joint_obs.shape[-1]} != critic width {self.joint_obs_width}"
            )
        if joint_act.shape[-1] != self.n_agents:
            raise ValueError(
                f"joint_act width {joint_act.shape[-1]} != n_agents {self.n_agents}"
            )

    def forward(self, joint_obs: np.ndarray, joint_act: np.ndarray):
        """Returns (q, tapes); q is a scalar for vector input, (batch,) for 2-D."""
        joint_obs = np.asarray(joint_obs, dtype=float)
        joint_act = np.asarray(joint_act, dtype=float)
        self._check_widths(joint_obs, joint_act)
        if self.obs_scale is not None:
            joint_obs = joint_obs / self.obs_scale
        o_feat, o_tape = nn.forward(self.obs_proj, joint_obs)
        a_feat, a_tape = nn.forward(self.act_proj, joint_act)
        feat = np.concatenate([o_feat, a_feat], axis=-1)
        q, t_tape = nn.forward(self.trunk, feat)
        return q[..., 0], (o_tape, a_tape, t_tape)

    def q_value(self, joint_obs: np.ndarray, joint_act: np.ndarray) -> float | np.ndarray:
        q, _ = self.forward(joint_obs, joint_act)
        return float(q) if np.ndim(q) == 0 else q

    def backward(self, tapes, q_grad) -> list[np.ndarray]:
        """Parameter gradients of sum(q * q_grad), ordered as parameters()."""
        o_tape, a_tape, t_tape = tapes
        g = np.asarray(q_grad, dtype=float)[..., None]
        proj = self.obs_proj.out_width
        trunk_grads, feat_grad = nn.backward(t_tape, g)
        o_grads, _ = nn.backward(o_tape, feat_grad[..., :proj])
        a_grads, _ = nn.backward(a_tape, feat_grad[..., proj:])
        return o_grads + a_grads + trunk_grads

    def sync_from(self, other: "CriticNet") -> None:
        nn.sync_target(other.obs_proj, self.obs_proj)
        nn.sync_target(other.act_proj, self.act_proj)
        nn.sync_target(other.trunk, self.trunk)

    def clone(self) -> "CriticNet":
        twin = CriticNet(
            self.joint_obs_width,
            self.n_agents,
            proj_width=self.obs_proj.out_width,
            hidden_width=self.trunk.specs[0].out_width,
            obs_scale=None if self.obs_scale is None else self.obs_scale.copy(),
            init="zeros",
        )
        twin.sync_from(self)
        return twin


def q_value(critic, joint_obs: np.ndarray, joint_act: np.ndarray) -> float | np.ndarray:
    """Scalar action value; accepts any object exposing q_value()."""
    return critic.q_value(np.asarray(joint_obs, dtype=float), np.asarray(joint_act, dtype=float))


@dataclass
class TdTarget:
    y: float


def td_target(
    r: float,
    next_obs: np.ndarray,
    next_act: np.ndarray,
    done: bool,
    gamma: float,
    target_net,
) -> TdTarget:
    """One-step bootstrapped target; the bootstrap is cut at terminal steps."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must be in [0, 1), got {gamma}")
    if done:
        return TdTarget(y=float(r))
    return TdTarget(y=float(r) + gamma * float(q_value(target_net, next_obs, next_act)))


def td_targets_batch(
    rewards: np.ndarray,
    next_obs: np.ndarray,
    next_acts: np.ndarray,
    dones: np.ndarray,
    gamma: float,
    target_net,
) -> np.ndarray:
    """Vectorized td_target over a batch of transitions."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must be in [0, 1), got {gamma}")
    boot = np.asarray(target_net.q_value(next_obs, next_acts), dtype=float)
    return np.asarray(rewards, dtype=float) + gamma * boot * (1.0 - np.asarray(dones, dtype=float))


def critic_loss(y: float, q: float) -> float:
    """Squared TD error for one sample; minibatch loss is the mean over samples.

    Gradient flows only through q: y is a detached target by construction.
    """
    if not (np.isfinite(y) and np.isfinite(q)):
        raise ValueError(f"non-finite loss inputs y={y}, q={q}")
    return float((y - q) ** 2)
