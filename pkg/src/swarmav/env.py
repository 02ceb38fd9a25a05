"""2D kinematic swarm environment for UAV collision avoidance.

A swarm of N constant-speed UAVs flies horizontal pre-planned paths across a
square screen while M obstacles cross the screen on straight lines aimed at
the swarm. Each UAV controls only its yaw angle. The episode ends on the
first safeguard violation (collision) or once every obstacle has left the
screen (success).

All randomness flows through explicit integer seeds; identical
(config, seed, action sequence) reproduces bit-identical episodes.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

log = logging.getLogger(__name__)

Vec2 = np.ndarray  # shape (2,), float64, finite components


class ConfigError(ValueError):
    """Raised when an environment configuration cannot satisfy its invariants."""


@dataclass
class EnvConfig:
    """Geometry, kinematics and exploration-anneal constants.

    Distances are meters, speeds m/s, angles radians unless noted.
    """

    n_uavs: int = 3
    n_obstacles: int = 1
    screen: float = 300.0
    sense_radius: float = 50.0
    spawn_radius: float = 30.0
    speed: float = 5.0
    d_obs: float = 20.0            # UAV-obstacle safeguard distance
    d_v2v: float = 5.0             # UAV-UAV safeguard distance
    d_max: float = 150.0           # max path deviation used in the reward
    collision_penalty: float = 0.0
    dt: float = 1.0
    max_yaw_deg: float = 45.0      # full-scale yaw change per action
    epsilon_start: float = 1.0
    epsilon_end: float = 0.1
    epsilon_steps: int = 50_000
    spawn_center: tuple[float, float] = (60.0, 150.0)
    obstacle_edge_jitter: float = 45.0  # spawn offset range along the chosen edge

    def validate(self) -> None:
        if self.n_uavs < 2:
            raise ConfigError(f"need at least 2 UAVs, got {self.n_uavs}")
        if self.n_obstacles < 0:
            raise ConfigError(f"n_obstacles must be >= 0, got {self.n_obstacles}")
        if self.speed <= 0 or self.dt <= 0:
            raise ConfigError("speed and dt must be positive")
        if self.sense_radius <= self.d_obs:
            raise ConfigError(
                f"sense_radius ({self.sense_radius}) must exceed d_obs ({self.d_obs}): "
                "obstacles must be visible before they are dangerous"
            )
        # Equally spaced UAVs on the spawn circle: chord length between
        # adjacent members must clear the safeguard distance.
        chord = 2.0 * self.spawn_radius * math.sin(math.pi / self.n_uavs)
        if chord <= self.d_v2v:
            raise ConfigError(
                f"spawn_radius {self.spawn_radius} m puts adjacent UAVs "
                f"{chord:.2f} m apart, within the {self.d_v2v} m safeguard; "
                "increase spawn_radius or reduce n_uavs"
            )


def default_spawn_radius(n_uavs: int) -> float:
    """Spawn circle radius matched to swarm size (30 m up to 3 UAVs, 50 m beyond)."""
    return 30.0 if n_uavs <= 3 else 50.0


# Scenario presets selectable by name on the CLI.
SCENARIOS: dict[str, EnvConfig] = {
    "2U1O": EnvConfig(n_uavs=2, n_obstacles=1, spawn_radius=30.0),
    "3U1O": EnvConfig(n_uavs=3, n_obstacles=1, spawn_radius=30.0),
    "4U2O": EnvConfig(n_uavs=4, n_obstacles=2, spawn_radius=50.0),
}


def scenario_config(name: str) -> EnvConfig:
    try:
        preset = SCENARIOS[name]
    except KeyError:
        raise ConfigError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None
    return replace(preset)


@dataclass
class UavState:
    position: Vec2
    heading: float          # [-pi, pi)
    speed: float
    preplanned_position: Vec2
    preplanned_velocity: Vec2

    @property
    def velocity(self) -> Vec2:
        return self.speed * np.array([math.cos(self.heading), math.sin(self.heading)])

    def copy(self) -> "UavState":
        return UavState(
            position=self.position.copy(),
            heading=self.heading,
            speed=self.speed,
            preplanned_position=self.preplanned_position.copy(),
            preplanned_velocity=self.preplanned_velocity.copy(),
        )


@dataclass
class ObstacleState:
    position: Vec2
    velocity: Vec2  # constant for the episode lifetime

    def copy(self) -> "ObstacleState":
        return ObstacleState(position=self.position.copy(), velocity=self.velocity.copy())


@dataclass
class WorldState:
    uavs: list[UavState]
    obstacles: list[ObstacleState]
    step_index: int = 0
    elapsed: float = 0.0

    @property
    def n_uavs(self) -> int:
        return len(self.uavs)

    def copy(self) -> "WorldState":
        return WorldState(
            uavs=[u.copy() for u in self.uavs],
            obstacles=[o.copy() for o in self.obstacles],
            step_index=self.step_index,
            elapsed=self.elapsed,
        )


@dataclass
class Observation:
    """One agent's fixed-width local view.

    self_block:     [x, y, vx, vy, plan_vx, plan_vy]
    neighbor_slots: (N-1, 5) rows of [rel_x, rel_y, vx, vy, presence]
    obstacle_slots: (M_max, 5) rows of [rel_x, rel_y, vx, vy, presence]

    Entities farther than the sensing radius leave their slot zeroed with
    presence 0. Populated slots are sorted by ascending distance, ties broken
    by entity index, so the layout is stable under agent relabeling.
    """

    self_block: np.ndarray
    neighbor_slots: np.ndarray
    obstacle_slots: np.ndarray

    def vector(self) -> np.ndarray:
        return np.concatenate(
            [self.self_block, self.neighbor_slots.ravel(), self.obstacle_slots.ravel()]
        )


def observation_width(n_uavs: int, m_max: int) -> int:
    return 6 + 5 * (n_uavs - 1) + 5 * m_max


def observation_scale(config: EnvConfig) -> np.ndarray:
    """Per-component normalization constants for one agent's observation vector.

    Dividing a raw observation by this vector brings positions, velocities and
    relative offsets to O(1), which the networks rely on. Presence flags keep
    scale 1.
    """
    scale = np.ones(observation_width(config.n_uavs, config.n_obstacles))
    scale[0:2] = config.screen
    scale[2:6] = config.speed
    slot = np.array([config.sense_radius, config.sense_radius, config.speed, config.speed, 1.0])
    n_slots = (config.n_uavs - 1) + config.n_obstacles
    scale[6:] = np.tile(slot, n_slots)
    return scale


def _wrap_angle(a: float) -> float:
    """Wrap to [-pi, pi)."""
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def _unit(v: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise ValueError("cannot normalize a zero-norm vector")
    return v / n


def spawn_episode(config: EnvConfig, seed: int) -> WorldState:
    """Spawn UAVs on a circle mid-left and obstacles on a seeded screen edge.

    UAVs sit equally spaced on a circle of spawn_radius around spawn_center,
    headed right along horizontal pre-planned paths. Obstacles spawn near the
    middle of one seeded edge (right, top or bottom), aimed at the swarm
    centroid at the common speed. Raises ConfigError if the resulting
    geometry violates the separation invariants.
    """
    config.validate()
    rng = np.random.default_rng(seed)

    cx, cy = config.spawn_center
    uavs = []
    for i in range(config.n_uavs):
        phi = 2.0 * math.pi * i / config.n_uavs
        pos = np.array([cx + config.spawn_radius * math.cos(phi),
                        cy + config.spawn_radius * math.sin(phi)])
        uavs.append(
            UavState(
                position=pos,
                heading=0.0,
                speed=config.speed,
                preplanned_position=pos.copy(),
                preplanned_velocity=np.array([config.speed, 0.0]),
            )
        )
    centroid = np.mean([u.position for u in uavs], axis=0)

    edge = int(rng.integers(3))  # 0 right, 1 top, 2 bottom
    obstacles = []
    for _ in range(config.n_obstacles):
        offset = float(rng.uniform(-config.obstacle_edge_jitter, config.obstacle_edge_jitter))
        if edge == 0:
            pos = np.array([config.screen, config.screen / 2.0 + offset])
        elif edge == 1:
            pos = np.array([config.screen / 2.0 + offset, config.screen])
        else:
            pos = np.array([config.screen / 2.0 + offset, 0.0])
        obstacles.append(ObstacleState(position=pos, velocity=config.speed * _unit(centroid - pos)))

    world = WorldState(uavs=uavs, obstacles=obstacles)
    _validate_spawn_separation(world, config)
    return world


def _validate_spawn_separation(world: WorldState, config: EnvConfig) -> None:
    for i in range(world.n_uavs):
        for j in range(i + 1, world.n_uavs):
            d = float(np.linalg.norm(world.uavs[i].position - world.uavs[j].position))
            if d <= config.d_v2v:
                raise ConfigError(
                    f"spawn rejected: UAVs {i} and {j} start {d:.2f} m apart "
                    f"(safeguard {config.d_v2v} m)"
                )
    for i, u in enumerate(world.uavs):
        for k, ob in enumerate(world.obstacles):
            d = float(np.linalg.norm(u.position - ob.position))
            if d <= config.sense_radius:
                raise ConfigError(
                    f"spawn rejected: obstacle {k} starts {d:.2f} m from UAV {i}, "
                    f"inside the {config.sense_radius} m sensing radius"
                )


def observe(world: WorldState, agent: int, config: EnvConfig) -> Observation:
    """Build agent's local view: itself plus entities within the sensing radius."""
    if not 0 <= agent < world.n_uavs:
        raise ValueError(f"agent index {agent} out of range for {world.n_uavs} UAVs")
    me = world.uavs[agent]
    self_block = np.concatenate([me.position, me.velocity, me.preplanned_velocity])

    neighbor_slots = np.zeros((world.n_uavs - 1, 5))
    visible = []
    for j, u in enumerate(world.uavs):
        if j == agent:
            continue
        rel = u.position - me.position
        d = float(np.linalg.norm(rel))
        if d <= config.sense_radius:
            visible.append((d, j, rel, u.velocity))
    visible.sort(key=lambda t: (t[0], t[1]))
    for slot, (_, _, rel, vel) in enumerate(visible):
        neighbor_slots[slot] = [rel[0], rel[1], vel[0], vel[1], 1.0]

    obstacle_slots = np.zeros((len(world.obstacles), 5))
    visible = []
    for k, ob in enumerate(world.obstacles):
        rel = ob.position - me.position
        d = float(np.linalg.norm(rel))
        if d <= config.sense_radius:
            visible.append((d, k, rel, ob.velocity))
    visible.sort(key=lambda t: (t[0], t[1]))
    for slot, (_, _, rel, vel) in enumerate(visible):
        obstacle_slots[slot] = [rel[0], rel[1], vel[0], vel[1], 1.0]

    return Observation(self_block, neighbor_slots, obstacle_slots)


def joint_observation(world: WorldState, config: EnvConfig) -> np.ndarray:
    """All agents' observation vectors concatenated in agent order."""
    return np.concatenate([observe(world, i, config).vector() for i in range(world.n_uavs)])


def yaw_from_action(a: float, config: EnvConfig | None = None) -> float:
    """Map a normalized action in [-1, 1] linearly to a heading change in radians.

    Out-of-range values are clamped with a warning: execution-time noise can
    push a sampled action past the bounds.
    """
    if not math.isfinite(a):
        raise ValueError(f"non-finite action {a!r}")
    max_yaw = math.radians(config.max_yaw_deg if config is not None else 45.0)
    if a < -1.0 or a > 1.0:
        log.warning("action %.4f outside [-1, 1]; clamping", a)
        a = max(-1.0, min(1.0, a))
    return a * max_yaw


def check_collision(world: WorldState, config: EnvConfig) -> bool:
    """True iff any UAV pair is strictly inside d_v2v or any UAV-obstacle pair
    strictly inside d_obs. Distances exactly at the safeguard do not collide."""
    for i in range(world.n_uavs):
        pi = world.uavs[i].position
        for j in range(i + 1, world.n_uavs):
            if float(np.linalg.norm(pi - world.uavs[j].position)) < config.d_v2v:
                return True
        for ob in world.obstacles:
            if float(np.linalg.norm(pi - ob.position)) < config.d_obs:
                return True
    return False


def compute_reward(world: WorldState, joint_action: np.ndarray, config: EnvConfig) -> float:
    """Global reward of the post-step world.

    Each UAV contributes  cos(velocity, plan velocity) - |action| - deviation/d_max,
    rewarding recovered speed direction, smooth low-turn flight, and staying
    near the pre-planned path. A collision adds -collision_penalty on top.
    """
    total = 0.0
    for u, a in zip(world.uavs, np.asarray(joint_action, dtype=float)):
        v = _unit(u.velocity)
        v_plan = _unit(u.preplanned_velocity)
        deviation = float(np.linalg.norm(u.position - u.preplanned_position))
        total += float(np.dot(v, v_plan)) - abs(float(a)) - deviation / config.d_max
    if check_collision(world, config):
        total -= config.collision_penalty
    return total


def _inside_screen(pos: np.ndarray, screen: float) -> bool:
    return 0.0 <= pos[0] <= screen and 0.0 <= pos[1] <= screen


def all_obstacles_exited(world: WorldState, config: EnvConfig) -> bool:
    return all(not _inside_screen(ob.position, config.screen) for ob in world.obstacles)


def step(
    world: WorldState, joint_action: np.ndarray, config: EnvConfig
) -> tuple[WorldState, float, bool, dict]:
    """Advance one control period synchronously for all UAVs.

    Each UAV turns by yaw_from_action(a_i) and advances speed*dt along its new
    heading; obstacles and pre-planned ghost positions advance linearly. The
    returned world is a new object; the input world is left untouched.
    """
    joint_action = np.asarray(joint_action, dtype=float)
    if joint_action.shape != (world.n_uavs,):
        raise ValueError(
            f"joint_action must have shape ({world.n_uavs},), got {joint_action.shape}"
        )
    if not np.all(np.isfinite(joint_action)):
        raise ValueError(f"non-finite joint_action {joint_action!r}")

    nxt = world.copy()
    for u, a in zip(nxt.uavs, joint_action):
        u.heading = _wrap_angle(u.heading + yaw_from_action(float(a), config))
        u.position = u.position + u.velocity * config.dt
        u.preplanned_position = u.preplanned_position + u.preplanned_velocity * config.dt
    for ob in nxt.obstacles:
        ob.position = ob.position + ob.velocity * config.dt
    nxt.step_index += 1
    nxt.elapsed += config.dt

    collision = check_collision(nxt, config)
    exited = all_obstacles_exited(nxt, config)
    reward = compute_reward(nxt, joint_action, config)
    done = collision or exited

    min_v2v = math.inf
    for i in range(nxt.n_uavs):
        for j in range(i + 1, nxt.n_uavs):
            min_v2v = min(min_v2v, float(np.linalg.norm(nxt.uavs[i].position - nxt.uavs[j].position)))
    min_obs = math.inf
    for u in nxt.uavs:
        for ob in nxt.obstacles:
            min_obs = min(min_obs, float(np.linalg.norm(u.position - ob.position)))

    info = {
        "collision": collision,
        "all_exited": exited,
        "min_uav_uav": min_v2v,
        "min_uav_obs": min_obs,
    }
    return nxt, reward, done, info


def max_episode_steps(config: EnvConfig) -> int:
    """Upper bound on episode length: obstacles traverse the screen and leave."""
    diag = math.sqrt(2.0) * config.screen
    return math.ceil((diag + 2.0 * config.sense_radius) / (config.speed * config.dt))


def anneal_epsilon(step_index: int, config: EnvConfig) -> float:
    """Linear exploration-probability schedule over the configured step budget."""
    if step_index < 0:
        raise ValueError(f"step_index must be >= 0, got {step_index}")
    if step_index >= config.epsilon_steps:
        return config.epsilon_end
    frac = step_index / config.epsilon_steps
    return config.epsilon_start + frac * (config.epsilon_end - config.epsilon_start)


class SwarmEnv:
    """Thin stateful wrapper over the functional core, for rollout loops."""

    def __init__(self, config: EnvConfig):
        config.validate()
        self.config = config
        self.world: WorldState | None = None

    def reset(self, seed: int) -> WorldState:
        self.world = spawn_episode(self.config, seed)
        return self.world

    def observe(self, agent: int) -> Observation:
        return observe(self.world, agent, self.config)

    def joint_observation(self) -> np.ndarray:
        return joint_observation(self.world, self.config)

    def step(self, joint_action: np.ndarray) -> tuple[WorldState, float, bool, dict]:
        self.world, reward, done, info = step(self.world, joint_action, self.config)
        return self.world, reward, done, info


TRACE_FORMAT = "# swarmav-trace v1"
TRACE_COLUMNS = ["step", "agent_id", "x", "y", "heading", "action", "reward", "done"]


def write_trace_csv(path, rows: list[dict]) -> None:
    """Write an episode trace. Rows use TRACE_COLUMNS keys; agent_id is
    'uav<i>' for swarm members and 'obs<k>' for obstacles (obstacle rows back
    the trajectory plots)."""
    with open(path, "w", newline="") as fh:
        fh.write(TRACE_FORMAT + "\n")
        writer = csv.DictWriter(fh, fieldnames=TRACE_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def trace_rows(world: WorldState, joint_action: np.ndarray, reward: float, done: bool) -> list[dict]:
    """Trace rows for one post-step world snapshot."""
    rows = []
    for i, u in enumerate(world.uavs):
        rows.append(
            {
                "step": world.step_index,
                "agent_id": f"uav{i}",
                "x": repr(float(u.position[0])),
                "y": repr(float(u.position[1])),
                "heading": repr(float(u.heading)),
                "action": repr(float(joint_action[i])),
                "reward": repr(float(reward)),
                "done": int(done),
            }
        )
    for k, ob in enumerate(world.obstacles):
        rows.append(
            {
                "step": world.step_index,
                "agent_id": f"obs{k}",
                "x": repr(float(ob.position[0])),
                "y": repr(float(ob.position[1])),
                "heading": repr(float(math.atan2(ob.velocity[1], ob.velocity[0]))),
                "action": repr(0.0),
                "reward": repr(float(reward)),
                "done": int(done),
            }
        )
    return rows


def read_trace_csv(path) -> list[dict]:
    """Parse a trace CSV back into typed rows; malformed lines raise with a
    line diagnostic."""
    rows = []
    with open(path, newline="") as fh:
        first = fh.readline().rstrip("\n")
        if not first.startswith("#"):
            raise ValueError(f"{path}: line 1: missing format-version header")
        reader = csv.DictReader(fh)
        for lineno, row in enumerate(reader, start=3):
            try:
                rows.append(
                    {
                        "step": int(row["step"]),
                        "agent_id": row["agent_id"],
                        "x": float(row["x"]),
                        "y": float(row["y"]),
                        "heading": float(row["heading"]),
                        "action": float(row["action"]),
                        "reward": float(row["reward"]),
                        "done": bool(int(row["done"])),
                    }
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}: line {lineno}: malformed trace row ({exc})") from None
    return rows
