"""Constrained-MDP intersection environment.

Simulation runs at 15 Hz; the policy acts at 5 Hz (training) or 10 Hz
(testing) by holding each action over an integer substep pattern whose
cumulative count keeps the simulation frequency exact (3,3,3,... at 5 Hz;
1,2,1,2,... at 10 Hz).  Reward and cost are evaluated once per policy step
on the post-step world; collisions, goal arrival and road departure are
checked every substep.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from . import geom, scenario, vehicle
from .geom import OrientedRect, Pose2D
from .scenario import IntersectionMap, MapConfig, SvAgent, TaskSpec, TrafficActor
from .vehicle import Action, EgoParams, VehicleState

TRACE_VERSION = "riskdrive-trace-v1"

SIM_HZ = 15
NO_SV_CLEARANCE = 100.0

# reference tracking weights, state order [x, y, vx, vy, heading, yaw_rate]
Q_REF = np.array([400.0, 400.0, 20.0, 20.0, 2.0, 0.5])
R_ACT = np.array([0.05, 0.02])
R_DELTA = np.array([0.10, 0.10])
R_COLLISION = -50.0
R_ARRIVE = 100.0


@dataclass(frozen=True)
class CostConfig:
    horizon: float = 2.0  # s
    dt: float = 0.2  # s per prediction step
    c_init: float = 1.0
    v_base: float = 9.0
    w: float = 1.0
    beta_min: float = 1.20
    beta_max: float = 1.50

    @property
    def steps(self) -> int:
        return max(1, round(self.horizon / self.dt))


@dataclass(frozen=True)
class EnvConfig:
    task: str = "GS"
    policy_hz: int = 5
    n_sv: int = 10
    m_sv: int = 12
    arrival_radius: float = 2.0
    time_limit: float = 25.0  # s
    speed_min: float = 6.0
    speed_max: float = 10.0
    min_gap: float = 15.0
    d_des_scale: float = 100.0  # m; reference length normalizing r_des
    rs_flag: bool = False
    map: MapConfig = field(default_factory=MapConfig)
    ego: EgoParams = field(default_factory=EgoParams)
    cost: CostConfig = field(default_factory=CostConfig)
    idm: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.task not in scenario.MOVEMENTS:
            raise ValueError(f"unknown task {self.task!r}")
        if not 1 <= self.policy_hz <= SIM_HZ:
            raise ValueError("policy frequency must lie on the simulation grid")

    @property
    def max_steps(self) -> int:
        return round(self.time_limit * self.policy_hz)


def substep_counts(policy_hz: int, step_index: int) -> int:
    """Simulator substeps for one policy step, keeping 15 Hz exact."""
    ratio = SIM_HZ / policy_hz
    return math.floor((step_index + 1) * ratio) - math.floor(step_index * ratio)


@dataclass
class Observation:
    ego_row: np.ndarray  # (9,)  [I_veh, x, y, vx, vy, heading, yaw_rate, d_veh, d_des]
    sv_matrix: np.ndarray  # (M_SV, 6)  [I_veh, dx, dy, dvx, dvy, heading]
    mask: np.ndarray  # (M_SV,) bool


@dataclass
class StepResult:
    obs: Observation
    reward: float
    cost: float
    done: bool
    done_reason: str  # collision | goal | timeout | none


@dataclass
class EpisodeReport:
    outcome: str  # collision | success | frozen
    cumulative_reward: float
    mean_speed: float
    steps: int


def world_velocity(st: VehicleState) -> tuple[float, float]:
    c, s = math.cos(st.heading), math.sin(st.heading)
    return st.vx * c - st.vy * s, st.vx * s + st.vy * c


class IntersectionEnv:
    def __init__(self, cfg: EnvConfig | None = None):
        self.cfg = cfg or EnvConfig()
        self.imap, self._tasks = scenario.build(self.cfg.map)
        self.task: TaskSpec = self._tasks[self.cfg.task]
        self._rng = np.random.default_rng(0)
        self._active = False
        self.history: list[dict] = []

    # ------------------------------------------------------------------
    # episode lifecycle

    def reset(self, seed: int) -> Observation:
        self._rng = np.random.default_rng(seed)
        p = self.task.entry_pose
        speed = float(self._rng.uniform(self.cfg.speed_min, self.cfg.speed_max))
        self.ego = VehicleState(p.x, p.y, speed, 0.0, p.heading, 0.0)
        self.agents: list[SvAgent] = scenario.spawn_traffic(
            self._rng,
            self.imap,
            n_sv=self.cfg.n_sv,
            speed_range=(self.cfg.speed_min, self.cfg.speed_max),
            min_gap=self.cfg.min_gap,
            ego_xy=np.array([p.x, p.y]),
            idm_cfg=self.cfg.idm,
        )
        self.a_prev = np.zeros(2)
        self.t = 0.0
        self.step_index = 0
        self._active = True
        self.history = []
        return self.build_observation()

    def step(self, action: Action, telemetry: dict | None = None) -> StepResult:
        if not self._active:
            raise RuntimeError("step() after episode end")
        dt = 1.0 / SIM_HZ
        n_sub = substep_counts(self.cfg.policy_hz, self.step_index)
        collided = False
        arrived = False
        for _ in range(n_sub):
            self.ego = vehicle.step_ego(self.ego, action, dt, self.cfg.ego)
            self._step_traffic(dt)
            self.t += dt
            if self._in_collision():
                collided = True
                break
            if self._goal_distance() < self.cfg.arrival_radius:
                arrived = True
                break

        a_now = np.array([action.ax, action.steer])
        reward = self.reward(a_now, self.a_prev, collided, arrived)
        cost = self.cost(action)
        self.a_prev = a_now
        self.step_index += 1

        if collided:
            done, reason = True, "collision"
        elif arrived:
            done, reason = True, "goal"
        elif self.step_index >= self.cfg.max_steps:
            done, reason = True, "timeout"
        else:
            done, reason = False, "none"
        if done:
            self._active = False

        record = {
            "t": round(self.t, 9),
            "ego": [self.ego.x, self.ego.y, self.ego.vx, self.ego.vy,
                    self.ego.heading, self.ego.yaw_rate],
            "action": [action.ax, action.steer],
            "reward": reward,
            "cost": cost,
            "done_reason": reason,
            "svs": [
                [a.uid, st.x, st.y, st.vx, st.heading]
                for a in self.agents
                for st in [a.state()]
            ],
        }
        if telemetry:
            record.update(telemetry)
        self.history.append(record)
        return StepResult(self.build_observation(), reward, cost, done, reason)

    def _step_traffic(self, dt: float) -> None:
        actors = self.actors()
        cache: dict = {}
        for agent in self.agents:
            acc = scenario.sv_decide(agent, actors, self.imap, dt, pred_cache=cache)
            agent.v = max(0.0, agent.v + acc * dt)
            agent.s += agent.v * dt
        self.agents = [a for a in self.agents if not a.done()]

    def actors(self) -> list[TrafficActor]:
        ego_actor = TrafficActor(-1, self.ego, self.task.task, self.task.entry_dir,
                                 self.cfg.ego.length, self.cfg.ego.width)
        return [ego_actor] + [
            TrafficActor(a.uid, a.state(), a.movement, a.d_in, a.length, a.width)
            for a in self.agents
        ]

    # ------------------------------------------------------------------
    # observation

    def ego_rect(self) -> OrientedRect:
        return OrientedRect(self.ego.pose(), self.cfg.ego.length, self.cfg.ego.width)

    def _in_collision(self) -> bool:
        if not self.imap.drivable(self.ego.x, self.ego.y):
            return True
        ego_poly = geom.corners(self.ego_rect())
        reach = 0.5 * math.hypot(self.cfg.ego.length, self.cfg.ego.width)
        for a in self.agents:
            st = a.state()
            if math.hypot(st.x - self.ego.x, st.y - self.ego.y) > reach + 0.5 * math.hypot(
                a.length, a.width
            ):
                continue
            if geom.sat_intersects(ego_poly, geom.corners(a.rect())):
                return True
        return False

    def _goal_distance(self) -> float:
        d = np.abs(self.task.target_points - np.array([self.ego.x, self.ego.y]))
        return float((d[:, 0] + d[:, 1]).min())

    def _min_clearance(self, agents: list[SvAgent]) -> float:
        if not agents:
            return NO_SV_CLEARANCE
        ev = self.ego_rect()
        return min(geom.vehicle_clearance(ev, a.rect()) for a in agents)

    def _in_range_agents(self) -> list[tuple[float, SvAgent]]:
        """SVs within the sensing window, sorted by Euclidean distance."""
        fwd = np.array([math.cos(self.ego.heading), math.sin(self.ego.heading)])
        out = []
        for a in self.agents:
            st = a.state()
            rel = np.array([st.x - self.ego.x, st.y - self.ego.y])
            lon = float(rel @ fwd)
            if -30.0 <= lon <= 70.0:
                out.append((float(np.linalg.norm(rel)), a))
        out.sort(key=lambda pair: pair[0])
        return out

    def build_observation(self) -> Observation:
        m = self.cfg.m_sv
        in_range = self._in_range_agents()[:m]
        sv_matrix = np.zeros((m, 6))
        mask = np.zeros(m, dtype=bool)
        evx, evy = world_velocity(self.ego)
        for i, (_, a) in enumerate(in_range):
            st = a.state()
            svx, svy = world_velocity(st)
            sv_matrix[i] = [1.0, st.x - self.ego.x, st.y - self.ego.y,
                            svx - evx, svy - evy, st.heading]
            mask[i] = True
        ego_row = np.array([
            1.0, self.ego.x, self.ego.y, self.ego.vx, self.ego.vy,
            self.ego.heading, self.ego.yaw_rate,
            self._min_clearance([a for _, a in in_range]),
            self._goal_distance(),
        ])
        return Observation(ego_row, sv_matrix, mask)

    # ------------------------------------------------------------------
    # reward and cost

    def reward(self, a: np.ndarray, a_prev: np.ndarray,
               collided: bool, arrived: bool) -> float:
        r = R_COLLISION * collided + R_ARRIVE * arrived

        state = np.array([self.ego.x, self.ego.y, self.ego.vx, self.ego.vy,
                          self.ego.heading, self.ego.yaw_rate])
        ref_err = math.inf
        for line in self.task.reference_lines:
            ref = scenario.nearest_ref_state(self.ego.pose(), line)
            err = state - ref
            err[4] = geom.normalize_angle(err[4])
            ref_err = min(ref_err, float(err @ (Q_REF * err)))
        r += 2.0 / (1.0 + ref_err)

        r -= float(a @ (R_ACT * a) + R_DELTA @ np.abs(a - a_prev))
        # goal distance enters normalized by a reference length so the term
        # stays a small dense shaping signal rather than dominating the return
        r -= (self._goal_distance() / self.cfg.d_des_scale) ** 2

        if self.cfg.rs_flag:
            d_veh = self._min_clearance(self.agents)
            if d_veh <= 0.2:
                r += -3.0 * (1.0 - d_veh)
            elif d_veh <= 0.5:
                r += -(1.0 - d_veh)
        return r

    def cost(self, action: Action) -> float:
        """Prediction-based collision cost (inflated-box SAT over the horizon)."""
        if not self.agents:
            return 0.0
        cc = self.cfg.cost
        n = cc.steps
        ego_poses = vehicle.predict(self.ego, n, cc.dt, "ego",
                                    frozen_action=action, params=self.cfg.ego)
        sv_poses = [vehicle.predict(a.state(), n, cc.dt, "sv") for a in self.agents]
        betas = np.linspace(cc.beta_min, cc.beta_max, n)
        v_t = self.ego.vx
        le, we = self.cfg.ego.length, self.cfg.ego.width
        total = 0.0
        for j, agent in enumerate(self.agents):
            for i in range(n):
                beta = float(betas[i])
                pe, ps = ego_poses[i], sv_poses[j][i]
                reach = 0.5 * beta * (math.hypot(le, we) + math.hypot(agent.length, agent.width))
                if math.hypot(pe.x - ps.x, pe.y - ps.y) > reach:
                    continue
                poly_e = geom.corners(OrientedRect(pe, le, we), beta)
                poly_s = geom.corners(OrientedRect(ps, agent.length, agent.width), beta)
                if geom.sat_intersects(poly_e, poly_s):
                    total += cc.c_init * (v_t / cc.v_base) * math.exp(-cc.w * beta)
        return total / len(self.agents)

    # ------------------------------------------------------------------
    # reporting

    def finalize_episode(self) -> EpisodeReport:
        if self._active:
            raise RuntimeError("episode still active")
        if not self.history:
            raise ValueError("empty episode")
        last = self.history[-1]["done_reason"]
        outcome = {"collision": "collision", "goal": "success", "timeout": "frozen"}[last]
        rewards = [h["reward"] for h in self.history]
        speeds = [h["ego"][2] for h in self.history]
        return EpisodeReport(outcome, float(sum(rewards)), float(np.mean(speeds)),
                             len(self.history))


# ---------------------------------------------------------------------------
# trace round-trip


def write_trace(path, history: list[dict]) -> None:
    with open(path, "w") as fh:
        fh.write(TRACE_VERSION + "\n")
        for rec in history:
            fh.write(json.dumps(rec) + "\n")


def read_trace(path) -> list[dict]:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != TRACE_VERSION:
            raise ValueError(f"unknown trace version {header!r}")
        out = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"malformed trace line {lineno}: {exc}") from exc
        return out
