"""Scenario benchmarking: safety, energy surrogate, timing, CSV reports.

Evaluation rolls greedy policies (no exploration noise) over a seeded episode
set, optionally behind the emergency avoidance filter, and aggregates
per-episode safety and energy numbers. The energy model is a surrogate with
arbitrary-but-fixed coefficients: only comparisons between runs of the same
model are meaningful. Decision latency is measured separately because wall
clock is inherently non-reproducible; it never enters the deterministic CSVs
unless explicitly requested.
"""

from __future__ import annotations

import csv
import statistics
import time
from dataclasses import dataclass, replace

import numpy as np

from . import policy as policy_mod
from .eas import EasConfig, predict_distances
from .env import EnvConfig, SwarmEnv, observation_width, observe
from .trainer import EpisodeRecord, TrainConfig, derived_seed, run_episode

METRICS_FORMAT = "# swarmav-metrics v1"
METRICS_COLUMNS = [
    "episode", "spawn_seed", "outcome", "steps", "episode_return",
    "min_uav_uav", "min_uav_obs", "energy", "eas_intervention_rate",
]

_STREAM_EVALCLI = 5


@dataclass
class EnergyModel:
    """Per-UAV power draw: hover/cruise base plus a turn cost linear in |a|.

    comm_power stays 0 for schemes that execute without vehicle-to-vehicle
    communication; communication-dependent baselines pay it every step.
    """

    base_power: float = 150.0   # W
    turn_coeff: float = 30.0    # W per unit |action|
    comm_power: float = 0.0     # W
    mass: float = 1.0           # kg

    def __post_init__(self):
        if min(self.base_power, self.turn_coeff, self.comm_power, self.mass) < 0:
            raise ValueError("energy model coefficients must be nonnegative")


def energy_estimate(episode: EpisodeRecord, model: EnergyModel) -> float:
    """Joule-equivalent surrogate: sum over steps and UAVs of
    (base + turn_coeff * |a| + comm) * dt."""
    if not episode.transitions:
        raise ValueError("cannot estimate energy of an empty episode")
    actions = episode.actions
    n = actions.shape[1]
    steps = actions.shape[0]
    turn = model.turn_coeff * float(np.sum(np.abs(actions)))
    return (model.base_power + model.comm_power) * n * steps * episode.dt + turn * episode.dt


@dataclass
class Metrics:
    failure_rate: float
    min_uav_uav: float
    min_uav_obs: float
    energy_surrogate: float
    eas_intervention_rate: float
    episodes: int
    mean_return: float
    mean_step_response_us: float | None = None  # only measured on request

    def __post_init__(self):
        if not 0.0 <= self.failure_rate <= 1.0:
            raise ValueError(f"failure_rate must be in [0, 1], got {self.failure_rate}")


@dataclass
class EvalResult:
    metrics: Metrics
    per_episode: list[dict]
    records: list[EpisodeRecord]


def evaluate(
    cfg: TrainConfig,
    policies: list[policy_mod.GaussianPolicy],
    episodes: int,
    eas_on: bool,
    seed: int,
    energy_model: EnergyModel | None = None,
    collect_traces: bool = False,
) -> EvalResult:
    """Greedy policies over a seeded episode set; aggregate Metrics are the
    mean of the per-episode rows."""
    if episodes < 1:
        raise ValueError("need at least one evaluation episode")
    env_cfg = cfg.env
    expected = policies[0].actor.in_width
    if expected != observation_width(env_cfg.n_uavs, env_cfg.n_obstacles):
        raise ValueError(
            f"checkpoint/scenario mismatch: actor input width {expected} does not fit "
            f"scenario {cfg.scenario} observation width "
            f"{observation_width(env_cfg.n_uavs, env_cfg.n_obstacles)}"
        )
    if len(policies) != env_cfg.n_uavs:
        raise ValueError(
            f"checkpoint/scenario mismatch: {len(policies)} actors for {env_cfg.n_uavs} UAVs"
        )

    model = energy_model if energy_model is not None else EnergyModel()
    eas_cfg = EasConfig(enabled=True) if eas_on else None
    env = SwarmEnv(replace(env_cfg))

    rows = []
    records = []
    for ep in range(episodes):
        spawn_seed = derived_seed(seed, _STREAM_EVALCLI, ep)
        rng = np.random.default_rng(np.random.SeedSequence([seed, _STREAM_EVALCLI, ep, 1]))
        rec = run_episode(
            env, policies, explore=False, epsilon=0.0, rng=rng,
            spawn_seed=spawn_seed, eas_cfg=eas_cfg, collect_trace=collect_traces,
        )
        records.append(rec)
        decisions = rec.length * env_cfg.n_uavs
        rows.append(
            {
                "episode": ep,
                "spawn_seed": spawn_seed,
                "outcome": rec.outcome,
                "steps": rec.length,
                "episode_return": rec.episode_return,
                "min_uav_uav": rec.min_uav_uav,
                "min_uav_obs": rec.min_uav_obs,
                "energy": energy_estimate(rec, model),
                "eas_intervention_rate": rec.eas_interventions / decisions if decisions else 0.0,
            }
        )

    metrics = Metrics(
        failure_rate=sum(r["outcome"] == "collision" for r in rows) / episodes,
        min_uav_uav=float(np.mean([r["min_uav_uav"] for r in rows])),
        min_uav_obs=float(np.mean([r["min_uav_obs"] for r in rows])),
        energy_surrogate=float(np.mean([r["energy"] for r in rows])),
        eas_intervention_rate=float(np.mean([r["eas_intervention_rate"] for r in rows])),
        episodes=episodes,
        mean_return=float(np.mean([r["episode_return"] for r in rows])),
    )
    return EvalResult(metrics=metrics, per_episode=rows, records=records)


def write_metrics_csv(path, result: EvalResult) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(METRICS_FORMAT + "\n")
        writer = csv.DictWriter(fh, fieldnames=METRICS_COLUMNS)
        writer.writeheader()
        for row in result.per_episode:
            out = dict(row)
            for key in ("episode_return", "min_uav_uav", "min_uav_obs", "energy",
                        "eas_intervention_rate"):
                out[key] = repr(float(out[key]))
            writer.writerow(out)


def write_metrics_summary(path, metrics: Metrics) -> None:
    with open(path, "w") as fh:
        fh.write("# swarmav-metrics-summary v1\n")
        fh.write("metric,value\n")
        fh.write(f"failure_rate,{metrics.failure_rate!r}\n")
        fh.write(f"min_uav_uav,{metrics.min_uav_uav!r}\n")
        fh.write(f"min_uav_obs,{metrics.min_uav_obs!r}\n")
        fh.write(f"energy_surrogate,{metrics.energy_surrogate!r}\n")
        fh.write(f"eas_intervention_rate,{metrics.eas_intervention_rate!r}\n")
        fh.write(f"mean_return,{metrics.mean_return!r}\n")
        fh.write(f"episodes,{metrics.episodes}\n")


def measure_response_time(
    policy: policy_mod.GaussianPolicy,
    world,
    agent: int,
    env_cfg: EnvConfig,
    iterations: int = 1000,
    with_eas: bool = True,
) -> float:
    """Median wall-clock microseconds of one decentralized decision: an actor
    forward pass plus, when enabled, the pass-through feasibility check."""
    if iterations < 100:
        raise ValueError(f"iterations must be >= 100 for a stable median, got {iterations}")
    obs = observe(world, agent, env_cfg).vector()
    for _ in range(50):  # warm-up
        a = policy.mean_action(obs)
        if with_eas:
            predict_distances(world, agent, a, env_cfg)

    samples = []
    for _ in range(iterations):
        t0 = time.perf_counter_ns()
        a = policy.mean_action(obs)
        if with_eas:
            predict_distances(world, agent, a, env_cfg)
        samples.append(time.perf_counter_ns() - t0)
    return statistics.median(samples) / 1000.0
