"""Emergency avoidance filter for decentralized execution.

Before executing a policy action, each agent predicts its separations one
control period ahead: itself under the candidate action, obstacles on their
straight lines, neighbors continuing straight (the communication-free
assumption; an agent cannot know its neighbors' next actions). An action
whose predicted separation falls to or below a safeguard distance is
infeasible. Infeasible policy actions are replaced by the nearest feasible
candidate drawn around them; if every candidate is infeasible the
least-violating one is taken.

Prediction only consults entities currently inside the agent's sensing
radius, so the filter needs nothing beyond local observation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .env import EnvConfig, WorldState, yaw_from_action


@dataclass
class FeasibilityReport:
    d_obs_pred: float   # min predicted obstacle separation (inf if none sensed)
    d_v2v_pred: float   # min predicted neighbor separation (inf if none sensed)
    feasible: bool


@dataclass
class EasConfig:
    enabled: bool = True
    sigma_exe: float = 1.0       # candidate spread around the policy action
    candidates: int = 32
    dedup_resolution: float = 1e-6


@dataclass
class EasDecision:
    action: float
    intervened: bool             # policy action was infeasible
    fallback: bool               # no candidate was feasible either
    candidates_drawn: int
    n_feasible: int


def predict_distances(world: WorldState, i: int, a: float, config: EnvConfig) -> FeasibilityReport:
    """Separations at the start of the next control loop if agent i takes a.

    Plain-float kinematics on the handful of sensed entities: this sits on
    the per-step decision path and must cost a small fraction of an actor
    forward pass.
    """
    me = world.uavs[i]
    mx, my = float(me.position[0]), float(me.position[1])
    step_len = me.speed * config.dt
    heading = me.heading + yaw_from_action(a, config)
    nx = mx + step_len * math.cos(heading)
    ny = my + step_len * math.sin(heading)
    sense = config.sense_radius

    d_obs_pred = math.inf
    for ob in world.obstacles:
        ox, oy = float(ob.position[0]), float(ob.position[1])
        if math.hypot(ox - mx, oy - my) > sense:
            continue
        px = ox + float(ob.velocity[0]) * config.dt
        py = oy + float(ob.velocity[1]) * config.dt
        d_obs_pred = min(d_obs_pred, math.hypot(px - nx, py - ny))

    d_v2v_pred = math.inf
    for j, u in enumerate(world.uavs):
        if j == i:
            continue
        ux, uy = float(u.position[0]), float(u.position[1])
        if math.hypot(ux - mx, uy - my) > sense:
            continue
        ustep = u.speed * config.dt
        px = ux + ustep * math.cos(u.heading)
        py = uy + ustep * math.sin(u.heading)
        d_v2v_pred = min(d_v2v_pred, math.hypot(px - nx, py - ny))

    feasible = d_obs_pred > config.d_obs and d_v2v_pred > config.d_v2v
    return FeasibilityReport(d_obs_pred=d_obs_pred, d_v2v_pred=d_v2v_pred, feasible=feasible)


def draw_candidates(a_policy: float, sigma_exe: float, k: int,
                    rng: np.random.Generator, resolution: float = 1e-6) -> list[float]:
    """K Gaussian candidates around the policy action, clamped to [-1, 1] and
    de-duplicated at the given resolution (clamping piles mass on the bounds)."""
    raw = a_policy + sigma_exe * rng.standard_normal(k)
    clamped = np.clip(raw, -1.0, 1.0)
    seen: set[int] = set()
    out: list[float] = []
    for v in clamped:
        key = round(float(v) / resolution)
        if key not in seen:
            seen.add(key)
            out.append(float(v))
    return out


def select_from_candidates(
    world: WorldState, i: int, a_policy: float, candidates: list[float], config: EnvConfig
) -> tuple[float, bool, int]:
    """(action, fallback, n_feasible): nearest feasible candidate to the policy
    action, or the candidate with the largest worst safeguard margin when none
    is feasible."""
    best_feasible = None
    best_dist = math.inf
    best_margin = -math.inf
    least_bad = None
    n_feasible = 0
    for cand in candidates:
        report = predict_distances(world, i, cand, config)
        if report.feasible:
            n_feasible += 1
            d = abs(cand - a_policy)
            if d < best_dist:
                best_dist = d
                best_feasible = cand
        margin = min(report.d_obs_pred - config.d_obs, report.d_v2v_pred - config.d_v2v)
        if margin > best_margin:
            best_margin = margin
            least_bad = cand
    if best_feasible is not None:
        return best_feasible, False, n_feasible
    return least_bad, True, 0


def emergency_select(
    world: WorldState,
    i: int,
    a_policy: float,
    config: EnvConfig,
    eas: EasConfig,
    rng: np.random.Generator,
) -> EasDecision:
    """Feasible policy actions pass through untouched (no candidate draws);
    infeasible ones are replaced per select_from_candidates."""
    if predict_distances(world, i, a_policy, config).feasible:
        return EasDecision(action=a_policy, intervened=False, fallback=False,
                           candidates_drawn=0, n_feasible=0)
    candidates = draw_candidates(a_policy, eas.sigma_exe, eas.candidates, rng,
                                 resolution=eas.dedup_resolution)
    action, fallback, n_feasible = select_from_candidates(world, i, a_policy, candidates, config)
    return EasDecision(action=action, intervened=True, fallback=fallback,
                       candidates_drawn=len(candidates), n_feasible=n_feasible)
