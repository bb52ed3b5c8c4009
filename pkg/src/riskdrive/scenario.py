"""Unsignalized intersection world.

Geometry convention: the conflict zone is a square centered at the origin
with half-size ``2 * lane_width`` (two lanes per direction, right-hand
traffic).  Approach directions are named by the side the road comes from:
'S' enters heading +y, 'N' heading -y, 'W' heading +x, 'E' heading -x.
Lane centerlines sit at lateral offsets 0.5 and 1.5 lane widths to the right
of the travel direction.

Routes and reference lines are straight segments joined by circular arcs,
arc-length parameterized and sampled every 0.5 m.  Surrounding vehicles
follow their route exactly; an IDM controller with prediction-based yielding
sets their longitudinal acceleration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geom, vehicle
from .geom import OrientedRect, Pose2D
from .vehicle import VehicleState

REF_SPEED = 9.0  # m/s, reference speed near/inside the intersection
SAMPLE_STEP = 0.5  # m, reference line resolution
PREDICT_HORIZON = 2.0  # s, yielding lookahead
TARGET_BEYOND_ZONE = 20.0  # m, target point distance past the conflict zone

DIRECTIONS = ("S", "W", "N", "E")  # counter-clockwise order
_HEADING = {"S": math.pi / 2, "W": 0.0, "N": -math.pi / 2, "E": math.pi}
MOVEMENTS = ("LT", "GS", "RT")


def _unit(heading: float) -> np.ndarray:
    return np.array([math.cos(heading), math.sin(heading)])


def _right(heading: float) -> np.ndarray:
    return np.array([math.sin(heading), -math.cos(heading)])


def right_of(d: str) -> str:
    """Approach direction whose traffic comes from the right of ``d``."""
    return DIRECTIONS[(DIRECTIONS.index(d) - 1) % 4]


def opposite(d: str) -> str:
    return DIRECTIONS[(DIRECTIONS.index(d) + 2) % 4]


def exit_heading(d_in: str, movement: str) -> float:
    h = _HEADING[d_in]
    if movement == "LT":
        h += math.pi / 2
    elif movement == "RT":
        h -= math.pi / 2
    return geom.normalize_angle(h)


# ---------------------------------------------------------------------------
# arc-length parameterized paths


class Path:
    """Straight/arc segment chain with exact pose queries by arc length."""

    def __init__(self, segments):
        self._segments = segments
        self._cum = np.cumsum([seg["length"] for seg in segments])
        self.length = float(self._cum[-1])

    def pose_at(self, s: float) -> tuple[float, float, float, float]:
        """(x, y, heading, curvature) at clamped arc length ``s``."""
        s = min(max(s, 0.0), self.length)
        idx = int(np.searchsorted(self._cum, s, side="left"))
        idx = min(idx, len(self._segments) - 1)
        s_local = s - (self._cum[idx - 1] if idx > 0 else 0.0)
        seg = self._segments[idx]
        if seg["kind"] == "straight":
            p = seg["start"] + s_local * seg["dir"]
            return float(p[0]), float(p[1]), seg["heading"], 0.0
        # arc
        ang = seg["a0"] + seg["sign"] * s_local / seg["radius"]
        c = seg["center"]
        x = c[0] + seg["radius"] * math.cos(ang)
        y = c[1] + seg["radius"] * math.sin(ang)
        heading = geom.normalize_angle(ang + seg["sign"] * math.pi / 2)
        return x, y, heading, seg["sign"] / seg["radius"]


def _straight(start: np.ndarray, end: np.ndarray) -> dict:
    d = end - start
    length = float(np.linalg.norm(d))
    return {
        "kind": "straight",
        "start": start.astype(float),
        "dir": d / length,
        "heading": math.atan2(d[1], d[0]),
        "length": length,
    }


def _arc(center: np.ndarray, radius: float, a0: float, sweep: float) -> dict:
    return {
        "kind": "arc",
        "center": center.astype(float),
        "radius": radius,
        "a0": a0,
        "sign": 1.0 if sweep > 0 else -1.0,
        "length": abs(sweep) * radius,
    }


@dataclass
class ReferenceLine:
    """Sampled route with constant reference speed."""

    path: Path
    xy: np.ndarray  # (n, 2)
    heading: np.ndarray  # (n,)
    curvature: np.ndarray  # (n,)
    s: np.ndarray  # (n,)
    ref_speed: float = REF_SPEED


def _sample(path: Path) -> ReferenceLine:
    s = np.arange(0.0, path.length + SAMPLE_STEP / 2, SAMPLE_STEP)
    s[-1] = min(s[-1], path.length)
    rows = [path.pose_at(si) for si in s]
    arr = np.asarray(rows)
    return ReferenceLine(path, arr[:, :2].copy(), arr[:, 2].copy(), arr[:, 3].copy(), s)


# ---------------------------------------------------------------------------
# map and tasks


@dataclass(frozen=True)
class MapConfig:
    lane_width: float = 4.0
    leg_length: float = 60.0
    vehicle_length: float = 5.0
    vehicle_width: float = 2.0


@dataclass
class IntersectionMap:
    cfg: MapConfig
    half_zone: float
    routes: dict = field(default_factory=dict)  # (d_in, movement, lane_idx) -> ReferenceLine

    def lane_offset(self, lane_idx: int) -> float:
        return (0.5 + lane_idx) * self.cfg.lane_width

    def drivable(self, x: float, y: float) -> bool:
        hz, reach = self.half_zone, self.half_zone + self.cfg.leg_length
        return (abs(x) <= reach and abs(y) <= hz) or (abs(y) <= reach and abs(x) <= hz)

    def conflict_zone(self) -> OrientedRect:
        return OrientedRect(Pose2D(0.0, 0.0, 0.0), 2 * self.half_zone, 2 * self.half_zone)


def _route_path(imap: IntersectionMap, d_in: str, movement: str, lane_idx: int) -> Path:
    cfg = imap.cfg
    hz, leg = imap.half_zone, cfg.leg_length
    h_in = _HEADING[d_in]
    u, r_in = _unit(h_in), _right(h_in)
    off = imap.lane_offset(lane_idx)
    entry_start = -u * (hz + leg) + r_in * off

    if movement == "GS":
        return Path([_straight(entry_start, u * (hz + leg) + r_in * off)])

    h_out = exit_heading(d_in, movement)
    w, r_out = _unit(h_out), _right(h_out)
    exit_off = imap.lane_offset(lane_idx)  # inner lane exits inner, outer exits outer
    p_cross = r_in * off + r_out * exit_off
    radius = float(p_cross @ u) + hz
    if radius <= 1.0:
        raise ValueError(f"degenerate turn radius {radius} for {d_in}/{movement}/{lane_idx}")
    a_pt = p_cross - radius * u
    b_pt = p_cross + radius * w
    turn_sign = 1.0 if movement == "LT" else -1.0
    center = a_pt + radius * turn_sign * np.array([-u[1], u[0]])
    a0 = math.atan2(a_pt[1] - center[1], a_pt[0] - center[0])
    exit_end = r_out * exit_off + w * (hz + leg)
    return Path(
        [
            _straight(entry_start, a_pt),
            _arc(center, radius, a0, turn_sign * math.pi / 2),
            _straight(b_pt, exit_end),
        ]
    )


def _exit_reference(imap: IntersectionMap, d_in: str, movement: str, entry_lane: int,
                    exit_lane: int) -> ReferenceLine:
    """Reference line from the entry lane to a specific exit lane."""
    if movement == "GS":
        # both candidate lines are full straights, one per through lane
        return imap.routes[(d_in, "GS", exit_lane)]
    cfg = imap.cfg
    hz, leg = imap.half_zone, cfg.leg_length
    h_in = _HEADING[d_in]
    u, r_in = _unit(h_in), _right(h_in)
    off = imap.lane_offset(entry_lane)
    h_out = exit_heading(d_in, movement)
    w, r_out = _unit(h_out), _right(h_out)
    exit_off = imap.lane_offset(exit_lane)
    p_cross = r_in * off + r_out * exit_off
    radius = float(p_cross @ u) + hz
    a_pt = p_cross - radius * u
    b_pt = p_cross + radius * w
    turn_sign = 1.0 if movement == "LT" else -1.0
    center = a_pt + radius * turn_sign * np.array([-u[1], u[0]])
    a0 = math.atan2(a_pt[1] - center[1], a_pt[0] - center[0])
    entry_start = -u * (hz + leg) + r_in * off
    exit_end = r_out * exit_off + w * (hz + leg)
    return _sample(
        Path(
            [
                _straight(entry_start, a_pt),
                _arc(center, radius, a0, turn_sign * math.pi / 2),
                _straight(b_pt, exit_end),
            ]
        )
    )


@dataclass
class TaskSpec:
    task: str  # LT | GS | RT
    entry_dir: str
    entry_lane: int
    entry_pose: Pose2D
    reference_lines: tuple[ReferenceLine, ReferenceLine]
    target_points: np.ndarray  # (2, 2)


EGO_ENTRY_DIR = "S"
_ENTRY_LANE = {"LT": 0, "GS": 0, "RT": 1}


def build(map_config: MapConfig | None = None) -> tuple[IntersectionMap, dict[str, TaskSpec]]:
    """Deterministic map plus one TaskSpec per driving task."""
    cfg = map_config or MapConfig()
    if cfg.lane_width <= cfg.vehicle_width:
        raise ValueError("lane_width must exceed vehicle width")
    imap = IntersectionMap(cfg, half_zone=2 * cfg.lane_width)
    for d in DIRECTIONS:
        for mv in MOVEMENTS:
            for lane in (0, 1):
                imap.routes[(d, mv, lane)] = _sample(_route_path(imap, d, mv, lane))

    tasks = {}
    d = EGO_ENTRY_DIR
    u = _unit(_HEADING[d])
    for task in MOVEMENTS:
        lane = _ENTRY_LANE[task]
        lines = tuple(
            _exit_reference(imap, d, task, lane, exit_lane) for exit_lane in (0, 1)
        )
        h_out = exit_heading(d, task)
        w, r_out = _unit(h_out), _right(h_out)
        targets = np.array(
            [
                r_out * imap.lane_offset(i) + w * (imap.half_zone + TARGET_BEYOND_ZONE)
                for i in (0, 1)
            ]
        )
        off = imap.lane_offset(lane)
        start = -u * (imap.half_zone + cfg.leg_length) + _right(_HEADING[d]) * off
        tasks[task] = TaskSpec(
            task, d, lane, Pose2D(start[0], start[1], _HEADING[d]), lines, targets
        )
    return imap, tasks


# ---------------------------------------------------------------------------
# traffic agents


@dataclass(frozen=True)
class IdmParams:
    v0: float  # desired speed
    headway: float = 1.5
    a_max: float = 2.0
    b_comf: float = 3.0
    s0: float = 4.0


@dataclass
class SvAgent:
    uid: int
    route: ReferenceLine
    d_in: str
    movement: str
    s: float
    v: float
    idm: IdmParams
    length: float = 5.0
    width: float = 2.0

    def state(self) -> VehicleState:
        x, y, heading, kappa = self.route.path.pose_at(self.s)
        return VehicleState(x, y, self.v, 0.0, heading, self.v * kappa)

    def done(self) -> bool:
        return self.s >= self.route.path.length - 1e-9

    def rect(self) -> OrientedRect:
        st = self.state()
        return OrientedRect(st.pose(), self.length, self.width)


@dataclass(frozen=True)
class TrafficActor:
    """Read-only view used for priority and yielding decisions."""

    uid: int
    state: VehicleState
    movement: str
    d_in: str
    length: float
    width: float


def spawn_traffic(
    rng: np.random.Generator,
    imap: IntersectionMap,
    n_sv: int = 10,
    speed_range: tuple[float, float] = (6.0, 10.0),
    min_gap: float = 15.0,
    ego_xy: np.ndarray | None = None,
    idm_cfg: dict | None = None,
) -> list[SvAgent]:
    """Randomized SV spawn; draws violating the spacing rule are removed."""
    idm_cfg = idm_cfg or {}
    agents: list[SvAgent] = []
    kept_xy: list[np.ndarray] = []
    leg = imap.cfg.leg_length
    for uid in range(n_sv):
        d = DIRECTIONS[rng.integers(len(DIRECTIONS))]
        mv = MOVEMENTS[rng.integers(len(MOVEMENTS))]
        lane = {"LT": 0, "RT": 1}.get(mv, int(rng.integers(2)))
        s = float(rng.uniform(0.0, leg - 5.0))
        v = float(rng.uniform(*speed_range))
        agent = SvAgent(
            uid,
            imap.routes[(d, mv, lane)],
            d,
            mv,
            s,
            v,
            IdmParams(v0=v, **idm_cfg),
        )
        st = agent.state()
        xy = np.array([st.x, st.y])
        if any(np.linalg.norm(xy - other) < min_gap for other in kept_xy):
            continue
        if ego_xy is not None and np.linalg.norm(xy - ego_xy) < min_gap:
            continue
        agents.append(agent)
        kept_xy.append(xy)
    return agents


def has_priority(a: TrafficActor, b: TrafficActor, a_inside: bool, b_inside: bool) -> bool:
    """True if ``a`` has right of way over ``b``.

    Concrete instantiation of the road-priority rules: a vehicle already in
    the conflict zone goes first; right turns yield to through traffic of
    their target road; left turns yield to oncoming through/right traffic;
    between two through movements, right-before-left.
    """
    if a_inside != b_inside:
        return a_inside
    if b.movement == "RT" and a.movement == "GS":
        if exit_heading(a.d_in, "GS") == exit_heading(b.d_in, "RT"):
            return True
    if b.movement == "LT" and a.d_in == opposite(b.d_in) and a.movement in ("GS", "RT"):
        return True
    if a.movement == "GS" and b.movement == "GS" and a.d_in == right_of(b.d_in):
        return True
    return False


def _inside_zone(imap: IntersectionMap, st: VehicleState) -> bool:
    return abs(st.x) <= imap.half_zone and abs(st.y) <= imap.half_zone


def predict_poses(actor: TrafficActor, n_steps: int, dt: float) -> list[Pose2D]:
    """Constant velocity / yaw-rate prediction shared by all yield checks."""
    return vehicle.predict(actor.state, n_steps, dt, "sv")


def sv_decide(
    agent: SvAgent,
    actors: list[TrafficActor],
    imap: IntersectionMap,
    dt: float,
    pred_cache: dict | None = None,
) -> float:
    """Longitudinal acceleration for one SV: IDM plus prediction-based yielding."""
    me = TrafficActor(agent.uid, agent.state(), agent.movement, agent.d_in,
                      agent.length, agent.width)
    others = [a for a in actors if a.uid != agent.uid]

    # --- IDM car following toward the nearest leader on this route
    acc = _idm_accel(agent, others, imap)

    # --- yielding: brake if a 2 s kinematic prediction conflicts with a
    # higher-priority vehicle
    if pred_cache is None:
        pred_cache = {}
    n_steps = 5
    dt_p = PREDICT_HORIZON / n_steps
    me_inside = _inside_zone(imap, me.state)
    my_preds = None
    for other in others:
        gap = math.hypot(other.state.x - me.state.x, other.state.y - me.state.y)
        if gap > (me.state.vx + other.state.vx) * PREDICT_HORIZON + 12.0:
            continue
        if not has_priority(other, me, _inside_zone(imap, other.state), me_inside):
            continue
        if my_preds is None:
            if me.uid not in pred_cache:
                pred_cache[me.uid] = predict_poses(me, n_steps, dt_p)
            my_preds = pred_cache[me.uid]
        if other.uid not in pred_cache:
            pred_cache[other.uid] = predict_poses(other, n_steps, dt_p)
        if _swept_conflict(me, my_preds, other, pred_cache[other.uid]):
            acc = -agent.idm.b_comf
            break

    return min(max(acc, -vehicle.AX_LIMIT), vehicle.AX_LIMIT)


def _idm_accel(agent: SvAgent, others: list[TrafficActor], imap: IntersectionMap) -> float:
    p = agent.idm
    st = agent.state()
    leader_gap, leader_v = None, 0.0
    line = agent.route
    for other in others:
        dx = other.state.x - st.x
        dy = other.state.y - st.y
        if math.hypot(dx, dy) > 60.0:
            continue
        idx = int(np.argmin((line.xy[:, 0] - other.state.x) ** 2
                            + (line.xy[:, 1] - other.state.y) ** 2))
        lateral = math.hypot(line.xy[idx, 0] - other.state.x, line.xy[idx, 1] - other.state.y)
        if lateral > imap.cfg.lane_width / 2:
            continue
        s_other = float(line.s[idx])
        gap = s_other - agent.s - 0.5 * (agent.length + other.length)
        if s_other <= agent.s or gap > 60.0:
            continue
        if leader_gap is None or gap < leader_gap:
            leader_gap, leader_v = gap, other.state.vx
    free = 1.0 - (st.vx / p.v0) ** 4 if p.v0 > 0 else 0.0
    if leader_gap is None:
        return p.a_max * free
    gap = max(leader_gap, 0.1)
    dv = st.vx - leader_v
    s_star = p.s0 + max(0.0, st.vx * p.headway + st.vx * dv / (2 * math.sqrt(p.a_max * p.b_comf)))
    return p.a_max * (free - (s_star / gap) ** 2)


def _swept_conflict(a: TrafficActor, a_poses, b: TrafficActor, b_poses) -> bool:
    reach = 0.5 * math.hypot(a.length, a.width) + 0.5 * math.hypot(b.length, b.width)
    for pa, pb in zip(a_poses, b_poses):
        if math.hypot(pa.x - pb.x, pa.y - pb.y) > reach:
            continue
        ra = geom.corners(OrientedRect(pa, a.length, a.width))
        rb = geom.corners(OrientedRect(pb, b.length, b.width))
        if geom.sat_intersects(ra, rb):
            return True
    return False


def nearest_ref_state(pos: Pose2D, line: ReferenceLine) -> np.ndarray:
    """Reference state [x, y, v_ref, 0, heading, 0] at the closest sample."""
    d2 = (line.xy[:, 0] - pos.x) ** 2 + (line.xy[:, 1] - pos.y) ** 2
    i = int(np.argmin(d2))
    return np.array([line.xy[i, 0], line.xy[i, 1], line.ref_speed, 0.0, line.heading[i], 0.0])
