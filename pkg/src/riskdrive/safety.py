"""Gradient-projection action correction.

Given a differentiable risk assessment of an action, the layer nudges an
initially proposed action toward the safe set by descending a soft loss

    L(a) = 1/2 ||a - a_init||^2 + lam * relu(risk(a) - d_thres)

with infinity-norm-normalized gradient steps, stopping as soon as the risk
falls at or below the threshold.  The risk function is abstract: the learner
plugs in its safe critic, tests plug in synthetic geometries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Node
from .vehicle import AX_LIMIT, STEER_LIMIT

_ACTION_LO = np.array([-AX_LIMIT, -STEER_LIMIT])
_ACTION_HI = np.array([AX_LIMIT, STEER_LIMIT])
_NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class CorrectionConfig:
    n_iter: int = 50
    eta: float = 0.02
    d_thres: float = 0.05
    lam: float = 10.0

    def __post_init__(self):
        if self.n_iter < 1 or self.eta <= 0 or self.lam <= 0:
            raise ValueError("n_iter, eta and lam must be positive")


@dataclass(frozen=True)
class CorrectionResult:
    action: np.ndarray  # (2,)
    risk: float  # assessment at the returned action
    iterations: int  # gradient steps actually taken
    corrected: bool  # any step taken at all
    converged: bool  # final risk <= d_thres


def assess(risk_fn, action: np.ndarray) -> float:
    """Scalar risk of an action, without building gradients."""
    node = risk_fn(ad.constant(np.asarray(action, dtype=float).reshape(1, 2)))
    if node.shape != (1, 1):
        raise ValueError(f"risk_fn must return a (1, 1) node, got {node.shape}")
    return float(node.value[0, 0])


def soft_loss(action_node: Node, a_init: np.ndarray, risk_node: Node,
              cfg: CorrectionConfig) -> Node:
    """Proximity-plus-violation objective minimized by :func:`correct`."""
    diff = ad.add(action_node, ad.constant(-np.asarray(a_init, dtype=float).reshape(1, 2)))
    prox = ad.scale(ad.sum_all(ad.square(diff)), 0.5)
    violation = ad.relu(ad.add(risk_node, ad.constant(np.array([[-cfg.d_thres]]))))
    return ad.add(prox, ad.scale(ad.sum_all(violation), cfg.lam))


def correct(risk_fn, a_init: np.ndarray, cfg: CorrectionConfig | None = None,
            telemetry: list | None = None) -> CorrectionResult:
    """Project an action toward the safe set by at most ``cfg.n_iter`` steps.

    ``risk_fn`` maps a (1, 2) action node to a (1, 1) risk node through the
    autodiff graph.  Each step moves against the soft-loss gradient scaled to
    infinity-norm ``eta`` and clamps to the action box; iteration stops the
    first time the assessment is at or below ``d_thres``.
    """
    cfg = cfg or CorrectionConfig()
    a_init = np.asarray(a_init, dtype=float).reshape(2)
    if np.any(a_init < _ACTION_LO - 1e-9) or np.any(a_init > _ACTION_HI + 1e-9):
        raise ValueError(f"initial action out of bounds: {a_init}")
    a = np.clip(a_init, _ACTION_LO, _ACTION_HI)

    iterations = 0
    risk = assess(risk_fn, a)
    for _ in range(cfg.n_iter):
        if risk <= cfg.d_thres:
            break
        action_node = ad.leaf(a.reshape(1, 2))
        loss = soft_loss(action_node, a_init, risk_fn(action_node), cfg)
        ad.backward(loss)
        grad = action_node.grad.reshape(2)
        if not np.any(grad):
            break  # stalled: risk above threshold but no descent direction
        step = cfg.eta / max(np.abs(grad).max(), _NORM_FLOOR)
        a = np.clip(a - step * grad, _ACTION_LO, _ACTION_HI)
        iterations += 1
        risk = assess(risk_fn, a)
        if telemetry is not None:
            telemetry.append({
                "iteration": iterations,
                "action": a.tolist(),
                "risk": risk,
                "grad_inf_norm": float(np.abs(grad).max()),
            })

    return CorrectionResult(
        action=a,
        risk=risk,
        iterations=iterations,
        corrected=iterations > 0,
        converged=risk <= cfg.d_thres,
    )
