"""Centralized training loop.

One optimization round per completed episode: the episode's transitions are
split into minibatches, each giving one critic update on the mean squared
one-step TD error, followed by per-agent advantages from the configured
credit method on the just-updated critic, then one update per actor. The
target critic hard-syncs every target_sync_period updates.

Every random draw derives from (seed, stream, episode_index), never from a
generator threaded across episodes, so a run is a pure function of its config
and an interrupted run resumed from its last checkpoint reproduces the
uninterrupted learning curve bit for bit.

The emergency avoidance filter is never applied during training or the
interleaved greedy evaluations; it is an execution-phase mechanism.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field, asdict, replace

import numpy as np

from . import credit, critic as critic_mod, nn, policy as policy_mod
from .eas import EasConfig, emergency_select
from .env import (
    EnvConfig,
    SwarmEnv,
    anneal_epsilon,
    max_episode_steps,
    observation_scale,
    observation_width,
    scenario_config,
    trace_rows,
)

log = logging.getLogger(__name__)

MANIFEST_FORMAT_VERSION = 1
CURVE_FORMAT = "# swarmav-curve v1"
CURVE_COLUMNS = ["env_step", "episodes", "mean_return", "critic_loss", "actor_loss_mean", "epsilon"]

# Seed-stream labels: every rng is derived from (seed, stream, indices...).
_STREAM_INIT = 0
_STREAM_SPAWN = 1
_STREAM_ROLLOUT = 2
_STREAM_TRAIN = 3
_STREAM_EVAL = 4


def derived_rng(seed: int, *labels: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, labels)]))


def derived_seed(seed: int, *labels: int) -> int:
    return int(derived_rng(seed, *labels).integers(2**62))


@dataclass
class Transition:
    joint_obs: np.ndarray
    joint_act: np.ndarray       # executed (clamped) actions, what the critic scores
    joint_act_raw: np.ndarray   # pre-clamp samples, what log-densities are taken at
    reward: float
    next_joint_obs: np.ndarray
    done: bool
    step_index: int


@dataclass
class EpisodeRecord:
    transitions: list[Transition]
    outcome: str                # "success" | "collision"
    length: int
    episode_return: float
    dt: float
    min_uav_uav: float
    min_uav_obs: float
    eas_interventions: int = 0
    eas_fallbacks: int = 0
    trace: list[dict] = field(default_factory=list)

    @property
    def actions(self) -> np.ndarray:
        return np.stack([t.joint_act for t in self.transitions])


@dataclass
class TrainConfig:
    scenario: str = "2U1O"
    total_env_steps: int = 100_000
    gamma: float = 0.95
    batch_size: int = 32
    target_sync_period: int = 100
    seed: int = 0
    method: credit.AdvantageMethod = field(default_factory=credit.AdvantageMethod)
    lr_critic: float = 1e-3
    lr_actor: float = 1e-4
    sigma: float = 0.1
    eval_every: int = 5_000
    eval_episodes: int = 20
    replay_size: int = 0        # 0 keeps training strictly on-policy
    env: EnvConfig | None = None

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")
        if self.batch_size < 1 or self.total_env_steps < 1:
            raise ValueError("batch_size and total_env_steps must be positive")
        if self.env is None:
            self.env = scenario_config(self.scenario)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["env"]["spawn_center"] = list(d["env"]["spawn_center"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        env = dict(d.pop("env"))
        env["spawn_center"] = tuple(env["spawn_center"])
        method = credit.AdvantageMethod(**d.pop("method"))
        return cls(env=EnvConfig(**env), method=method, **d)


@dataclass
class CriticState:
    net: critic_mod.CriticNet
    target: critic_mod.CriticNet
    opt: nn.OptState
    updates: int = 0


@dataclass
class ActorState:
    policy: policy_mod.GaussianPolicy
    opt: nn.OptState


@dataclass
class TrainStepReport:
    critic_loss: float
    actor_loss_mean: float
    applied: bool


def build_learner(cfg: TrainConfig) -> tuple[CriticState, list[ActorState]]:
    """Seeded critic, target and per-agent actors with their optimizers."""
    env_cfg = cfg.env
    n = env_cfg.n_uavs
    obs_w = observation_width(n, env_cfg.n_obstacles)
    scale = observation_scale(env_cfg)
    joint_scale = np.tile(scale, n)

    c_net = critic_mod.CriticNet(
        n * obs_w, n, rng=derived_rng(cfg.seed, _STREAM_INIT, 0), obs_scale=joint_scale
    )
    target = c_net.clone()
    critic_state = CriticState(
        net=c_net, target=target, opt=nn.OptState.for_params(c_net.parameters(), cfg.lr_critic)
    )

    actor_states = []
    for i in range(n):
        actor = policy_mod.build_actor_net(obs_w, rng=derived_rng(cfg.seed, _STREAM_INIT, 1 + i))
        pol = policy_mod.GaussianPolicy(actor=actor, sigma=cfg.sigma, obs_scale=scale)
        actor_states.append(
            ActorState(policy=pol, opt=nn.OptState.for_params(actor.parameters(), cfg.lr_actor))
        )
    return critic_state, actor_states


def run_episode(
    env: SwarmEnv,
    policies: list[policy_mod.GaussianPolicy],
    explore: bool,
    epsilon: float,
    rng: np.random.Generator | None,
    spawn_seed: int,
    eas_cfg: EasConfig | None = None,
    collect_trace: bool = False,
) -> EpisodeRecord:
    """Roll one full episode from spawn to termination.

    eas_cfg=None (the training setting) leaves every policy action untouched;
    passing an enabled EasConfig applies the execution-phase filter and counts
    its interventions.
    """
    n = env.config.n_uavs
    if len(policies) != n:
        raise ValueError(f"need {n} policies, got {len(policies)}")
    world = env.reset(spawn_seed)
    step_cap = max_episode_steps(env.config) + 1

    transitions: list[Transition] = []
    trace: list[dict] = []
    total_reward = 0.0
    min_vv = math.inf
    min_obs = math.inf
    interventions = 0
    fallbacks = 0
    done = False
    info: dict = {}

    joint_obs = env.joint_observation()
    obs_w = joint_obs.shape[0] // n
    while not done:
        if world.step_index >= step_cap:
            raise RuntimeError(
                f"episode exceeded the {step_cap}-step termination bound; "
                "environment invariant violated"
            )
        exec_actions = np.empty(n)
        raw_actions = np.empty(n)
        for i, pol in enumerate(policies):
            obs_i = joint_obs[i * obs_w : (i + 1) * obs_w]
            a_exec, a_raw = policy_mod.sample_action(pol, obs_i, explore, epsilon, rng)
            if eas_cfg is not None and eas_cfg.enabled:
                decision = emergency_select(world, i, a_exec, env.config, eas_cfg, rng)
                if decision.intervened:
                    interventions += 1
                    fallbacks += int(decision.fallback)
                a_exec = decision.action
            exec_actions[i] = a_exec
            raw_actions[i] = a_raw
        world, reward, done, info = env.step(exec_actions)
        next_joint_obs = env.joint_observation()
        transitions.append(
            Transition(
                joint_obs=joint_obs,
                joint_act=exec_actions,
                joint_act_raw=raw_actions,
                reward=reward,
                next_joint_obs=next_joint_obs,
                done=done,
                step_index=world.step_index - 1,
            )
        )
        total_reward += reward
        min_vv = min(min_vv, info["min_uav_uav"])
        min_obs = min(min_obs, info["min_uav_obs"])
        if collect_trace:
            trace.extend(trace_rows(world, exec_actions, reward, done))
        joint_obs = next_joint_obs

    return EpisodeRecord(
        transitions=transitions,
        outcome="collision" if info["collision"] else "success",
        length=len(transitions),
        episode_return=total_reward,
        dt=env.config.dt,
        min_uav_uav=min_vv,
        min_uav_obs=min_obs,
        eas_interventions=interventions,
        eas_fallbacks=fallbacks,
        trace=trace,
    )


def _batch_arrays(batch: list[Transition]):
    jo = np.stack([t.joint_obs for t in batch])
    ja = np.stack([t.joint_act for t in batch])
    ja_raw = np.stack([t.joint_act_raw for t in batch])
    r = np.array([t.reward for t in batch])
    njo = np.stack([t.next_joint_obs for t in batch])
    dn = np.array([float(t.done) for t in batch])
    return jo, ja, ja_raw, r, njo, dn


def train_step(
    batch: list[Transition],
    critic_state: CriticState,
    actor_states: list[ActorState],
    cfg: TrainConfig,
    rng: np.random.Generator | None = None,
) -> TrainStepReport:
    """One critic update, then one update per actor, in that fixed order.

    Non-finite losses or gradients anywhere abort the step: the critic is
    restored to its pre-step parameters and no actor moves.
    """
    if not batch:
        raise ValueError("train_step needs a nonempty batch")
    n = len(actor_states)
    jo, ja, ja_raw, rewards, njo, dones = _batch_arrays(batch)
    obs_w = jo.shape[1] // n

    next_act = np.empty((len(batch), n))
    for i, st in enumerate(actor_states):
        next_act[:, i] = st.policy.mean_actions(njo[:, i * obs_w : (i + 1) * obs_w])

    y = critic_mod.td_targets_batch(rewards, njo, next_act, dones, cfg.gamma, critic_state.target)
    q, tapes = critic_state.net.forward(jo, ja)
    loss = float(np.mean((y - q) ** 2))
    if not math.isfinite(loss):
        log.warning("non-finite critic loss; train step aborted")
        return TrainStepReport(critic_loss=loss, actor_loss_mean=math.nan, applied=False)
    critic_grads = critic_state.net.backward(tapes, 2.0 * (q - y) / len(batch))
    if not all(np.all(np.isfinite(g)) for g in critic_grads):
        log.warning("non-finite critic gradients; train step aborted")
        return TrainStepReport(critic_loss=loss, actor_loss_mean=math.nan, applied=False)

    snapshot = [p.copy() for p in critic_state.net.parameters()]
    moments = (
        [m.copy() for m in critic_state.opt.first_moment],
        [v.copy() for v in critic_state.opt.second_moment],
        critic_state.opt.step_count,
    )
    nn.adam_step(critic_state.net.parameters(), critic_grads, critic_state.opt)
    critic_state.net.mark_updated()

    def rollback():
        for dst, src in zip(critic_state.net.parameters(), snapshot):
            dst[...] = src
        for dst, src in zip(critic_state.opt.first_moment, moments[0]):
            dst[...] = src
        for dst, src in zip(critic_state.opt.second_moment, moments[1]):
            dst[...] = src
        critic_state.opt.step_count = moments[2]
        critic_state.net.mark_updated()

    advantages = credit.advantages_batch(critic_state.net, jo, ja, cfg.method, rng=rng)
    actor_losses = []
    actor_grads = []
    for i, st in enumerate(actor_states):
        obs_i = jo[:, i * obs_w : (i + 1) * obs_w]
        acts_i = ja_raw[:, i]
        adv_i = advantages[:, i]
        if not np.all(np.isfinite(adv_i)):
            log.warning("non-finite advantages for agent %d; train step aborted", i)
            rollback()
            return TrainStepReport(critic_loss=loss, actor_loss_mean=math.nan, applied=False)
        grads = policy_mod.actor_gradient_batch(st.policy, obs_i, acts_i, adv_i)
        if not all(np.all(np.isfinite(g)) for g in grads):
            log.warning("non-finite actor gradients for agent %d; train step aborted", i)
            rollback()
            return TrainStepReport(critic_loss=loss, actor_loss_mean=math.nan, applied=False)
        # actor_gradient_batch returns the ascent direction of E[log pi * A];
        # the optimizer descends, so apply its negation.
        actor_grads.append([np.negative(g) for g in grads])
        mu = st.policy.mean_actions(obs_i)
        logp = (
            -0.5 * ((acts_i - mu) / st.policy.sigma) ** 2
            - math.log(st.policy.sigma)
            - policy_mod.LOG_SQRT_2PI
        )
        actor_losses.append(float(-np.mean(logp * adv_i)))

    for st, grads in zip(actor_states, actor_grads):
        nn.optimizer_update(st.policy.actor, grads, st.opt)

    critic_state.updates += 1
    if critic_state.updates % cfg.target_sync_period == 0:
        critic_state.target.sync_from(critic_state.net)

    return TrainStepReport(
        critic_loss=loss, actor_loss_mean=float(np.mean(actor_losses)), applied=True
    )


@dataclass
class TrainResult:
    out_dir: str
    env_steps: int
    episodes: int
    curve_rows: list[dict]


def _write_curve(path: str, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(CURVE_FORMAT + "\n")
        fh.write(",".join(CURVE_COLUMNS) + "\n")
        for row in rows:
            fh.write(
                ",".join(
                    [
                        str(row["env_step"]),
                        str(row["episodes"]),
                        repr(row["mean_return"]),
                        repr(row["critic_loss"]),
                        repr(row["actor_loss_mean"]),
                        repr(row["epsilon"]),
                    ]
                )
                + "\n"
            )


def read_curve(path: str) -> list[dict]:
    rows = []
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("#"):
            raise ValueError(f"{path}: line 1: missing format-version header")
        header = fh.readline().rstrip("\n").split(",")
        if header != CURVE_COLUMNS:
            raise ValueError(f"{path}: line 2: unexpected header {header}")
        for lineno, line in enumerate(fh, start=3):
            parts = line.rstrip("\n").split(",")
            if len(parts) != len(CURVE_COLUMNS):
                raise ValueError(f"{path}: line {lineno}: expected {len(CURVE_COLUMNS)} fields")
            try:
                rows.append(
                    {
                        "env_step": int(parts[0]),
                        "episodes": int(parts[1]),
                        "mean_return": float(parts[2]),
                        "critic_loss": float(parts[3]),
                        "actor_loss_mean": float(parts[4]),
                        "epsilon": float(parts[5]),
                    }
                )
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from None
    return rows


def save_learner(out_dir: str, cfg: TrainConfig, critic_state: CriticState,
                 actor_states: list[ActorState], state: dict) -> None:
    ckpt = os.path.join(out_dir, "checkpoints")
    os.makedirs(ckpt, exist_ok=True)
    c = critic_state.net
    nn.save_checkpoint(
        os.path.join(ckpt, "critic.json"),
        {
            "role": "critic",
            "n_agents": c.n_agents,
            "joint_obs_width": c.joint_obs_width,
            "obs_scale": None if c.obs_scale is None else c.obs_scale.tolist(),
            "obs_proj": nn.net_to_dict(c.obs_proj),
            "act_proj": nn.net_to_dict(c.act_proj),
            "trunk": nn.net_to_dict(c.trunk),
        },
    )
    t = critic_state.target
    nn.save_checkpoint(
        os.path.join(ckpt, "target.json"),
        {
            "role": "critic_target",
            "n_agents": t.n_agents,
            "joint_obs_width": t.joint_obs_width,
            "obs_scale": None if t.obs_scale is None else t.obs_scale.tolist(),
            "obs_proj": nn.net_to_dict(t.obs_proj),
            "act_proj": nn.net_to_dict(t.act_proj),
            "trunk": nn.net_to_dict(t.trunk),
        },
    )
    for i, st in enumerate(actor_states):
        nn.save_checkpoint(
            os.path.join(ckpt, f"actor_{i}.json"),
            {
                "role": "actor",
                "agent_id": i,
                "sigma": st.policy.sigma,
                "obs_scale": None if st.policy.obs_scale is None else st.policy.obs_scale.tolist(),
                "net": nn.net_to_dict(st.policy.actor),
            },
        )
    opt_state = {
        "critic": _opt_to_dict(critic_state.opt),
        "actors": [_opt_to_dict(st.opt) for st in actor_states],
        "critic_updates": critic_state.updates,
    }
    state = dict(state)
    state["optimizers"] = opt_state
    nn.save_checkpoint(os.path.join(ckpt, "state.json"), state)


def _opt_to_dict(opt: nn.OptState) -> dict:
    return {
        "first_moment": [m.ravel().tolist() for m in opt.first_moment],
        "second_moment": [v.ravel().tolist() for v in opt.second_moment],
        "step_count": opt.step_count,
        "learning_rate": opt.learning_rate,
        "beta1": opt.beta1,
        "beta2": opt.beta2,
        "eps_stability": opt.eps_stability,
    }


def _opt_from_dict(d: dict, params: list[np.ndarray]) -> nn.OptState:
    opt = nn.OptState.for_params(
        params,
        learning_rate=d["learning_rate"],
        beta1=d["beta1"],
        beta2=d["beta2"],
        eps_stability=d["eps_stability"],
    )
    opt.step_count = d["step_count"]
    for dst, src in zip(opt.first_moment, d["first_moment"]):
        dst[...] = np.asarray(src, dtype=float).reshape(dst.shape)
    for dst, src in zip(opt.second_moment, d["second_moment"]):
        dst[...] = np.asarray(src, dtype=float).reshape(dst.shape)
    return opt


def load_critic_checkpoint(path: str) -> critic_mod.CriticNet:
    data = nn.load_checkpoint(path)
    if data.get("role") not in ("critic", "critic_target"):
        raise nn.CheckpointError(f"{path}: expected a critic checkpoint, got role={data.get('role')!r}")
    obs_proj = nn.net_from_dict(data["obs_proj"])
    act_proj = nn.net_from_dict(data["act_proj"])
    trunk = nn.net_from_dict(data["trunk"])
    c = critic_mod.CriticNet(
        data["joint_obs_width"],
        data["n_agents"],
        proj_width=obs_proj.out_width,
        hidden_width=trunk.specs[0].out_width,
        obs_scale=None if data["obs_scale"] is None else np.asarray(data["obs_scale"]),
        init="zeros",
    )
    c.obs_proj.set_parameters(obs_proj.parameters())
    c.act_proj.set_parameters(act_proj.parameters())
    c.trunk.set_parameters(trunk.parameters())
    return c


def load_actor_checkpoint(path: str) -> policy_mod.GaussianPolicy:
    data = nn.load_checkpoint(path)
    if data.get("role") != "actor":
        raise nn.CheckpointError(f"{path}: expected an actor checkpoint, got role={data.get('role')!r}")
    net = nn.net_from_dict(data["net"])
    return policy_mod.GaussianPolicy(
        actor=net,
        sigma=data["sigma"],
        obs_scale=None if data["obs_scale"] is None else np.asarray(data["obs_scale"]),
    )


def load_policies(run_dir: str) -> tuple[TrainConfig, list[policy_mod.GaussianPolicy]]:
    cfg = load_manifest(run_dir)
    ckpt = os.path.join(run_dir, "checkpoints")
    policies = [
        load_actor_checkpoint(os.path.join(ckpt, f"actor_{i}.json"))
        for i in range(cfg.env.n_uavs)
    ]
    return cfg, policies


def save_manifest(out_dir: str, cfg: TrainConfig) -> None:
    payload = {
        "format_version": MANIFEST_FORMAT_VERSION,
        "kind": "train_run",
        "config": cfg.to_dict(),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)


def load_manifest(run_dir: str) -> TrainConfig:
    path = os.path.join(run_dir, "manifest.json")
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format_version") != MANIFEST_FORMAT_VERSION:
        raise nn.CheckpointError(f"{path}: unsupported manifest version")
    return TrainConfig.from_dict(payload["config"])


def evaluate_greedy(cfg: TrainConfig, policies: list[policy_mod.GaussianPolicy]) -> float:
    """Mean return of the fixed greedy evaluation episode set (no noise, no EAS)."""
    env = SwarmEnv(replace(cfg.env))
    total = 0.0
    for j in range(cfg.eval_episodes):
        rec = run_episode(
            env, policies, explore=False, epsilon=0.0, rng=None,
            spawn_seed=derived_seed(cfg.seed, _STREAM_EVAL, j),
        )
        total += rec.episode_return
    return total / cfg.eval_episodes


def train(cfg: TrainConfig, out_dir: str, resume: bool = False) -> TrainResult:
    """Run (or resume) a training run, writing manifest, learning curve and
    checkpoints under out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    env = SwarmEnv(replace(cfg.env))

    if resume:
        disk_cfg = load_manifest(out_dir)
        state_path = os.path.join(out_dir, "checkpoints", "state.json")
        state = nn.load_checkpoint(state_path)
        # The resumed run may extend total_env_steps; everything else is pinned
        # by the manifest so the trajectory of the run cannot silently change.
        disk_dict = disk_cfg.to_dict()
        new_dict = cfg.to_dict()
        disk_dict.pop("total_env_steps")
        new_dict.pop("total_env_steps")
        if disk_dict != new_dict:
            raise ValueError("resume config differs from the run manifest beyond total_env_steps")
        critic_state, actor_states = build_learner(cfg)
        ckpt = os.path.join(out_dir, "checkpoints")
        critic_state.net = load_critic_checkpoint(os.path.join(ckpt, "critic.json"))
        critic_state.target = load_critic_checkpoint(os.path.join(ckpt, "target.json"))
        for i, st in enumerate(actor_states):
            st.policy = load_actor_checkpoint(os.path.join(ckpt, f"actor_{i}.json"))
        opt = state["optimizers"]
        critic_state.opt = _opt_from_dict(opt["critic"], critic_state.net.parameters())
        critic_state.updates = opt["critic_updates"]
        for st, od in zip(actor_states, opt["actors"]):
            st.opt = _opt_from_dict(od, st.policy.actor.parameters())
        env_step = state["env_step"]
        episodes = state["episodes"]
        next_eval = state["next_eval"]
        acc = state["accumulators"]
        curve_rows = read_curve(os.path.join(out_dir, "curve.csv"))[: state["curve_rows"]]
        replay: list[Transition] = []  # replay contents are not checkpointed
        if cfg.replay_size > 0 and episodes > 0:
            log.warning("resuming with replay_size > 0 refills the buffer from scratch")
    else:
        save_manifest(out_dir, cfg)
        critic_state, actor_states = build_learner(cfg)
        env_step = 0
        episodes = 0
        next_eval = cfg.eval_every
        acc = {"critic_loss": 0.0, "actor_loss": 0.0, "steps": 0}
        curve_rows = []
        replay = []

    policies = [st.policy for st in actor_states]

    def flush_eval() -> None:
        mean_return = evaluate_greedy(cfg, policies)
        steps = max(acc["steps"], 1)
        curve_rows.append(
            {
                "env_step": env_step,
                "episodes": episodes,
                "mean_return": mean_return,
                "critic_loss": acc["critic_loss"] / steps,
                "actor_loss_mean": acc["actor_loss"] / steps,
                "epsilon": anneal_epsilon(env_step, cfg.env),
            }
        )
        acc["critic_loss"] = 0.0
        acc["actor_loss"] = 0.0
        acc["steps"] = 0

    def save_all() -> None:
        _write_curve(os.path.join(out_dir, "curve.csv"), curve_rows)
        save_learner(
            out_dir,
            cfg,
            critic_state,
            actor_states,
            {
                "env_step": env_step,
                "episodes": episodes,
                "next_eval": next_eval,
                "accumulators": dict(acc),
                "curve_rows": len(curve_rows),
            },
        )

    while env_step < cfg.total_env_steps:
        eps = anneal_epsilon(env_step, cfg.env)
        record = run_episode(
            env,
            policies,
            explore=True,
            epsilon=eps,
            rng=derived_rng(cfg.seed, _STREAM_ROLLOUT, episodes),
            spawn_seed=derived_seed(cfg.seed, _STREAM_SPAWN, episodes),
        )
        env_step += record.length
        episodes += 1

        if cfg.replay_size > 0:
            replay.extend(record.transitions)
            if len(replay) > cfg.replay_size:
                del replay[: len(replay) - cfg.replay_size]

        n_batches = math.ceil(len(record.transitions) / cfg.batch_size)
        for b in range(n_batches):
            rng = derived_rng(cfg.seed, _STREAM_TRAIN, episodes - 1, b)
            if cfg.replay_size > 0:
                idx = rng.integers(len(replay), size=min(cfg.batch_size, len(replay)))
                batch = [replay[int(k)] for k in idx]
            else:
                batch = record.transitions[b * cfg.batch_size : (b + 1) * cfg.batch_size]
            report = train_step(batch, critic_state, actor_states, cfg, rng=rng)
            if report.applied:
                acc["critic_loss"] += report.critic_loss
                acc["actor_loss"] += report.actor_loss_mean
                acc["steps"] += 1

        if env_step >= next_eval:
            flush_eval()
            save_all()
            while next_eval <= env_step:
                next_eval += cfg.eval_every

    save_all()
    return TrainResult(out_dir=out_dir, env_steps=env_step, episodes=episodes,
                       curve_rows=curve_rows)
