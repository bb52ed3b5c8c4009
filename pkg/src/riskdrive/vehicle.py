"""Discrete vehicle transition models.

The ego vehicle uses a backward-Euler-inspired dynamic bicycle model that
stays well-conditioned at low speed; surrounding vehicles use constant
velocity / constant yaw-rate kinematics.  Cornering stiffness parameters are
stored as positive magnitudes and enter the lateral dynamics with the
sign convention that tire force opposes slip (the update is unstable at
driving speeds otherwise).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geom import Pose2D, normalize_angle

AX_LIMIT = 5.0
STEER_LIMIT = 0.6


@dataclass(frozen=True)
class VehicleState:
    x: float
    y: float
    vx: float  # longitudinal, body frame
    vy: float  # lateral, body frame
    heading: float
    yaw_rate: float

    def pose(self) -> Pose2D:
        return Pose2D(self.x, self.y, self.heading)

    def is_finite(self) -> bool:
        return all(
            math.isfinite(v)
            for v in (self.x, self.y, self.vx, self.vy, self.heading, self.yaw_rate)
        )


@dataclass(frozen=True)
class Action:
    ax: float
    steer: float

    def __post_init__(self):
        if not (abs(self.ax) <= AX_LIMIT and abs(self.steer) <= STEER_LIMIT):
            raise ValueError(f"action out of bounds: ({self.ax}, {self.steer})")


@dataclass(frozen=True)
class EgoParams:
    m: float = 1500.0  # kg
    iz: float = 2500.0  # kg m^2
    lf: float = 1.2  # m
    lr: float = 1.4  # m
    cf: float = 80000.0  # N/rad, magnitude
    cr: float = 80000.0  # N/rad, magnitude
    length: float = 5.0
    width: float = 2.0

    def __post_init__(self):
        vals = (self.m, self.iz, self.lf, self.lr, self.cf, self.cr, self.length, self.width)
        if any(v <= 0 for v in vals):
            raise ValueError("ego parameters must be positive")
        if self.lf + self.lr >= self.length:
            raise ValueError("wheelbase exceeds vehicle length")


def clamp_action(raw: tuple[float, float]) -> Action:
    ax, steer = raw
    if math.isnan(ax) or math.isnan(steer):
        raise ValueError("NaN action")
    return Action(
        min(max(ax, -AX_LIMIT), AX_LIMIT),
        min(max(steer, -STEER_LIMIT), STEER_LIMIT),
    )


def step_ego(s: VehicleState, a: Action, ts: float, p: EgoParams) -> VehicleState:
    """One discrete dynamic-bicycle step of length ``ts``.

    vy and yaw_rate come from the implicit (backward-Euler-inspired) update;
    x, y, vx and heading are explicit.  vx is floored at 0 (no reverse).
    """
    if ts <= 0:
        raise ValueError("ts must be positive")
    cf, cr = -p.cf, -p.cr  # force-opposes-slip sign convention
    vx, vy, w = s.vx, s.vy, s.yaw_rate
    cos_h, sin_h = math.cos(s.heading), math.sin(s.heading)

    den_vy = p.m * vx - ts * (cf + cr)
    den_w = ts * (p.lf**2 * cf + p.lr**2 * cr) - p.iz * vx
    if abs(den_vy) < 1e-9 or abs(den_w) < 1e-9:
        raise ArithmeticError("singular dynamics step")

    x_n = s.x + ts * (vx * cos_h - vy * sin_h)
    y_n = s.y + ts * (vx * sin_h + vy * cos_h)
    vx_n = max(0.0, vx + ts * (a.ax + vy * w))
    vy_n = (
        p.m * vx * vy
        + ts * ((p.lf * cf - p.lr * cr) * w - cf * a.steer * vx - p.m * vx**2 * w)
    ) / den_vy
    heading_n = normalize_angle(s.heading + ts * w)
    w_n = (
        -p.iz * w * vx - ts * ((p.lf * cf - p.lr * cr) * vy - p.lf * cf * a.steer * vx)
    ) / den_w

    out = VehicleState(x_n, y_n, vx_n, vy_n, heading_n, w_n)
    if not out.is_finite():
        raise ArithmeticError("non-finite ego state")
    return out


def step_sv(s: VehicleState, ts: float) -> VehicleState:
    """Constant-velocity / constant-yaw-rate kinematic step for an SV."""
    if ts <= 0:
        raise ValueError("ts must be positive")
    cos_h, sin_h = math.cos(s.heading), math.sin(s.heading)
    return VehicleState(
        s.x + ts * (s.vx * cos_h - s.vy * sin_h),
        s.y + ts * (s.vx * sin_h + s.vy * cos_h),
        s.vx,
        s.vy,
        normalize_angle(s.heading + ts * s.yaw_rate),
        s.yaw_rate,
    )


def predict(
    s: VehicleState,
    horizon_steps: int,
    ts: float,
    kind: str,
    frozen_action: Action | None = None,
    params: EgoParams | None = None,
) -> list[Pose2D]:
    """Open-loop rollout: frozen action for the ego, frozen velocity for SVs."""
    if horizon_steps < 1:
        raise ValueError("horizon_steps must be >= 1")
    if kind == "ego":
        if frozen_action is None:
            raise ValueError("ego prediction requires frozen_action")
        params = params or EgoParams()
    elif kind != "sv":
        raise ValueError(f"unknown kind {kind!r}")

    poses = []
    cur = s
    for _ in range(horizon_steps):
        cur = step_ego(cur, frozen_action, ts, params) if kind == "ego" else step_sv(cur, ts)
        poses.append(cur.pose())
    return poses
