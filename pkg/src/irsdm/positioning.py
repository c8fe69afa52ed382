"""Transmitter placement by surrogate descent and fixed-point iteration.

Placement maximizes the summed user beam gains. An arithmetic-geometric mean
bound turns that into minimizing a positively weighted sum of transmitter
distances to the panel and to each user,

    J2(x, y) = sum_k ( d_tp * t1_k + d_tk * t2_k ),

which is strictly convex in the horizontal position because the altitude
offsets keep every distance term smooth. Its stationarity condition is a
weighted-average fixed point, iterated with the weights refreshed each step
and the iterate projected back onto the feasible angle box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import LinkBudget, LosChannelSet, ReceiverChannel, los_channels
from .errors import ConvergenceError, InfeasibleError
from .geometry import Scene, clamp_to_angle_box
from .precoding import (
    ConstellationSpec,
    CiMargin,
    PrecoderState,
    ci_margins,
    solve_min_power,
)

MIN_ANCHOR_DISTANCE = 1e-6


def beam_gains(
    channels: LosChannelSet,
    phases: np.ndarray,
    weights: np.ndarray,
    receiver: ReceiverChannel,
) -> tuple[complex, complex]:
    """Unweighted cascade and direct beam gains (h_r^T Phi G w, h_a^T w)."""
    cascade = complex((receiver.h_r_bar * np.exp(1j * np.asarray(phases))) @ channels.g_bar @ weights)
    direct = complex(receiver.h_a_bar @ weights)
    return cascade, direct


@dataclass(frozen=True)
class PositionWeights:
    """Positive per-user weights of the placement surrogate.

    ``panel_leg`` multiplies the transmitter-to-panel distance, ``direct_leg``
    the transmitter-to-user distance. The beam gains they were derived from
    are kept for inspection.
    """

    panel_leg: np.ndarray  # (K,)
    direct_leg: np.ndarray  # (K,)
    cascade_gain: np.ndarray  # (K,) complex
    direct_gain: np.ndarray  # (K,) complex


def position_weights(
    channels: LosChannelSet, phases: np.ndarray, weights: np.ndarray
) -> PositionWeights:
    """Surrogate weights from the current beam gains, one pair per user."""
    cascade = np.empty(channels.k_u, dtype=complex)
    direct = np.empty(channels.k_u, dtype=complex)
    t1 = np.empty(channels.k_u)
    t2 = np.empty(channels.k_u)
    for k, user in enumerate(channels.users):
        cascade[k], direct[k] = beam_gains(channels, phases, weights, user)
        if abs(cascade[k]) == 0.0 or abs(direct[k]) == 0.0:
            raise ValueError("zero beam gain; surrogate weights undefined")
        loss = user.loss
        t1[k] = 1.0 / (math.sqrt(loss.rho * loss.eps_uav_irs) * loss.zeta1 * abs(cascade[k]))
        t2[k] = 1.0 / (math.sqrt(loss.rho * loss.eps_uav_rx) * abs(direct[k]))
    return PositionWeights(panel_leg=t1, direct_leg=t2, cascade_gain=cascade, direct_gain=direct)


def _anchor_distances(scene: Scene, x: float, y: float) -> tuple[float, np.ndarray]:
    dz_panel = scene.uav.z - scene.irs_origin.z
    d_tp = math.sqrt(
        (x - scene.irs_origin.x) ** 2 + (y - scene.irs_origin.y) ** 2 + dz_panel**2
    )
    users = np.array([[u.x, u.y, u.z] for u in scene.users])
    d_tk = np.sqrt((x - users[:, 0]) ** 2 + (y - users[:, 1]) ** 2 + (scene.uav.z - users[:, 2]) ** 2)
    return d_tp, d_tk


def j2_value(scene: Scene, pw: PositionWeights, x: float | None = None, y: float | None = None) -> float:
    """Surrogate objective at the scene's transmitter position (or an override)."""
    x = scene.uav.x if x is None else x
    y = scene.uav.y if y is None else y
    d_tp, d_tk = _anchor_distances(scene, x, y)
    if d_tp <= 0.0 or np.any(d_tk <= 0.0):
        raise ValueError("transmitter coincides with an anchor")
    return float(np.sum(d_tp * pw.panel_leg + d_tk * pw.direct_leg))


def j2_gradient(scene: Scene, pw: PositionWeights, x: float | None = None, y: float | None = None) -> np.ndarray:
    """Closed-form horizontal gradient of the surrogate."""
    x = scene.uav.x if x is None else x
    y = scene.uav.y if y is None else y
    d_tp, d_tk = _anchor_distances(scene, x, y)
    if d_tp <= 0.0 or np.any(d_tk <= 0.0):
        raise ValueError("transmitter coincides with an anchor")
    users = np.array([[u.x, u.y] for u in scene.users])
    gx = np.sum((x - scene.irs_origin.x) / d_tp * pw.panel_leg + (x - users[:, 0]) / d_tk * pw.direct_leg)
    gy = np.sum((y - scene.irs_origin.y) / d_tp * pw.panel_leg + (y - users[:, 1]) / d_tk * pw.direct_leg)
    return np.array([gx, gy])


def j2_hessian(scene: Scene, pw: PositionWeights, x: float | None = None, y: float | None = None) -> np.ndarray:
    """Closed-form 2x2 Hessian of the surrogate; symmetric positive definite."""
    x = scene.uav.x if x is None else x
    y = scene.uav.y if y is None else y
    d_tp, d_tk = _anchor_distances(scene, x, y)
    if d_tp <= 0.0 or np.any(d_tk <= 0.0):
        raise ValueError("transmitter coincides with an anchor")
    px, py = x - scene.irs_origin.x, y - scene.irs_origin.y
    users = np.array([[u.x, u.y] for u in scene.users])
    ux, uy = x - users[:, 0], y - users[:, 1]
    t1, t2 = pw.panel_leg, pw.direct_leg
    h_xx = np.sum(t1 * (1.0 / d_tp - px**2 / d_tp**3) + t2 * (1.0 / d_tk - ux**2 / d_tk**3))
    h_yy = np.sum(t1 * (1.0 / d_tp - py**2 / d_tp**3) + t2 * (1.0 / d_tk - uy**2 / d_tk**3))
    h_xy = np.sum(-t1 * px * py / d_tp**3 - t2 * ux * uy / d_tk**3)
    return np.array([[h_xx, h_xy], [h_xy, h_yy]])


def fixed_point_solve(
    scene: Scene,
    pw: PositionWeights,
    tol: float = 1e-6,
    max_iter: int = 500,
) -> np.ndarray:
    """Weighted-average fixed point of the surrogate, projected onto the box.

    Each step targets the weight-averaged anchor point (a pure descent
    direction on J2), projects it onto the feasible sector, and accepts only
    if the surrogate decreases, halving the step otherwise. Candidates
    landing within ``MIN_ANCHOR_DISTANCE`` of a user are rejected the same
    way. Stops at displacement below ``tol`` or when no admissible step
    improves; raises :class:`ConvergenceError` if the displacement grows ten
    times in a row.
    """
    users = np.array([[u.x, u.y] for u in scene.users])
    t1_sum = pw.panel_leg.sum()

    def value(px, py):
        d_tp, d_tk = _anchor_distances(scene, px, py)
        return float(d_tp * t1_sum + np.dot(d_tk, pw.direct_leg))

    x, y = clamp_to_angle_box(scene, scene.uav.x, scene.uav.y)
    f_cur = value(x, y)
    trace = [(x, y)]
    prev_disp = math.inf
    growth = 0
    for _ in range(max_iter):
        d_tp, d_tk = _anchor_distances(scene, x, y)
        num_x = np.sum(scene.irs_origin.x / d_tp * pw.panel_leg + users[:, 0] / d_tk * pw.direct_leg)
        num_y = np.sum(scene.irs_origin.y / d_tp * pw.panel_leg + users[:, 1] / d_tk * pw.direct_leg)
        den = np.sum(pw.panel_leg / d_tp + pw.direct_leg / d_tk)
        cand_x, cand_y = num_x / den, num_y / den
        step = 1.0
        accepted = False
        for _ in range(50):
            zx, zy = x + step * (cand_x - x), y + step * (cand_y - y)
            new_x, new_y = clamp_to_angle_box(scene, zx, zy)
            _, d_new = _anchor_distances(scene, new_x, new_y)
            f_new = value(new_x, new_y)
            if np.all(d_new >= MIN_ANCHOR_DISTANCE) and f_new < f_cur - 1e-15 * (1.0 + abs(f_cur)):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        disp = math.hypot(new_x - x, new_y - y)
        x, y, f_cur = new_x, new_y, f_new
        trace.append((x, y))
        if disp < tol:
            break
        if disp > prev_disp:
            growth += 1
            if growth >= 10:
                raise ConvergenceError(
                    "fixed-point placement diverged: displacement grew for 10 "
                    "consecutive iterations",
                    trace=trace,
                )
        else:
            growth = 0
        prev_disp = disp
    return np.array([x, y])


@dataclass(frozen=True)
class PositionResult:
    """Outcome of the placement loop: final scene, channels, and solver state."""

    scene: Scene
    channels: LosChannelSet
    margin: CiMargin
    state: PrecoderState
    trace: tuple[tuple[int, float, float, float, float], ...]  # (iter, x, y, J2, P_min)
    stop_reason: str


def position_outer_loop(
    scene: Scene,
    budget: LinkBudget,
    constellation: ConstellationSpec,
    r_min: float,
    gamma: float,
    p_max: float,
    phases: np.ndarray,
    max_outer: int = 30,
    fp_tol: float = 1e-6,
    fp_max_iter: int = 500,
    position_tol: float = 1e-6,
    symbol: int = 0,
) -> PositionResult:
    """Alternate placement and minimum-power weights until power stops falling.

    Each round refreshes the surrogate weights from the current beam gains,
    moves the transmitter by the projected fixed point, recomputes the margin
    targets at the new geometry, and re-solves the minimum-power weights. A
    round whose power exceeds the budget or the previous round's power is
    rejected and iteration stops, so the reported trace is monotone in P_min.
    """
    channels = los_channels(scene, budget)
    margin = ci_margins(channels, constellation, r_min, gamma, p_max, budget.noise_power)
    state = solve_min_power(channels, constellation, margin, phases, p_max, symbols=[symbol])
    p_prev = state.p_min
    if p_prev > p_max:
        raise InfeasibleError(p_prev, p_max)
    pw = position_weights(channels, phases, state.weights[0])
    trace = [(0, scene.uav.x, scene.uav.y, j2_value(scene, pw), p_prev)]
    stop_reason = "max_outer"
    for it in range(1, max_outer + 1):
        xy = fixed_point_solve(scene, pw, tol=fp_tol, max_iter=fp_max_iter)
        candidate = scene.with_uav_xy(float(xy[0]), float(xy[1]))
        cand_channels = los_channels(candidate, budget)
        cand_margin = ci_margins(
            cand_channels, constellation, r_min, gamma, p_max, budget.noise_power
        )
        cand_state = solve_min_power(
            cand_channels, constellation, cand_margin, phases, p_max, symbols=[symbol]
        )
        p_cand = cand_state.p_min
        if p_cand > p_max:
            stop_reason = "budget_exceeded"
            break
        if p_cand > p_prev * (1.0 + 1e-12):
            stop_reason = "power_increase"
            break
        moved = math.hypot(candidate.uav.x - scene.uav.x, candidate.uav.y - scene.uav.y)
        scene, channels, margin, state, p_prev = candidate, cand_channels, cand_margin, cand_state, p_cand
        pw = position_weights(channels, phases, state.weights[0])
        trace.append((it, scene.uav.x, scene.uav.y, j2_value(scene, pw), p_prev))
        if moved < position_tol:
            stop_reason = "stabilized"
            break
    return PositionResult(
        scene=scene,
        channels=channels,
        margin=margin,
        state=state,
        trace=tuple(trace),
        stop_reason=stop_reason,
    )
