"""Penalty-driven amplitude refinement at a fixed transmitter position.

With placement and panel phases frozen, the remaining freedom is how far each
user's amplitude can be pushed above its floor before the power budget binds.
A quadratic penalty on the constraint residuals gives a closed-form amplitude
update per user; re-solving the minimum-power weights for the lifted targets
closes the loop. Iterations stop when the budget is exceeded or the summed
amplitude stalls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError
from .precoding import min_power_weights


def update_amplitude(channel: np.ndarray, weights: np.ndarray, phase: float, xi: float) -> float:
    """Stationary amplitude of the penalized objective for one user.

    ``xi`` is the penalty strength; as it grows the update approaches the
    amplitude currently delivered along the target phase.
    """
    if xi <= 0.0:
        raise ValueError("penalty strength must be positive")
    aligned = (complex(np.asarray(channel) @ np.asarray(weights)) * np.exp(-1j * phase)).real
    return (1.0 + 2.0 * xi * aligned) / (2.0 * xi)


def penalty_upper_bound(
    channel: np.ndarray, weights: np.ndarray, phase: float, r_min_k: float
) -> float:
    """Largest penalty keeping the updated amplitude at or above its floor.

    Returns +inf when the floor is already met along the target phase, in
    which case any penalty is admissible.
    """
    aligned = (complex(np.asarray(channel) @ np.asarray(weights)) * np.exp(-1j * phase)).real
    denom = 2.0 * r_min_k - 2.0 * aligned
    if denom <= 0.0:
        return math.inf
    return 1.0 / denom


def default_penalty(bounds, reference_amplitude: float | None = None) -> float:
    """Penalty schedule: 90% of the tightest finite bound while that bound
    still moves the amplitudes.

    When every bound is inactive (or so tight that the implied lift vanishes
    against the working amplitudes), fall back to a penalty whose additive
    lift is 5% of ``reference_amplitude``, or 1.0 when no scale is known.
    """
    fallback = 1.0 if not reference_amplitude or reference_amplitude <= 0.0 else 10.0 / reference_amplitude
    finite = [b for b in bounds if math.isfinite(b)]
    if not finite:
        return fallback
    xi = 0.9 * min(finite)
    if reference_amplitude and 1.0 / (2.0 * xi) < 1e-6 * reference_amplitude:
        return fallback
    return xi


def solve_weights_for_amplitudes(
    channel_rows: np.ndarray,
    amplitudes: np.ndarray,
    user_phases: np.ndarray,
    eve_amplitude: float,
    eve_phase: float,
) -> np.ndarray:
    """Least-norm weights delivering the given amplitudes at the given phases."""
    targets = np.concatenate(
        [
            np.asarray(amplitudes) * np.exp(1j * np.asarray(user_phases)),
            [eve_amplitude * np.exp(1j * eve_phase)],
        ]
    )
    return min_power_weights(channel_rows, targets)


@dataclass(frozen=True)
class PenaltyState:
    """Accepted refinement state for one symbol."""

    xi: float
    amplitudes: np.ndarray  # (K,)
    weights: np.ndarray  # (N,)
    p_min: float
    trace: tuple[tuple[int, float, float, float], ...]  # (iter, xi, sum_t, power)


def alternate_optimize(
    channel_rows: np.ndarray,
    user_phases: np.ndarray,
    r_min_k: np.ndarray,
    initial_amplitudes: np.ndarray,
    initial_weights: np.ndarray,
    eve_amplitude: float,
    eve_phase: float,
    p_max: float,
    max_iter: int = 100,
    tol: float = 1e-9,
) -> PenaltyState:
    """Alternate amplitude lifts and weight re-solves until the budget binds.

    The returned state is always the last one whose power fits the budget;
    its summed amplitude is nondecreasing over accepted iterations.
    """
    rows = np.asarray(channel_rows, dtype=complex)
    user_rows = rows[:-1]
    amps = np.asarray(initial_amplitudes, dtype=float).copy()
    w = np.asarray(initial_weights, dtype=complex)
    power = float(np.vdot(w, w).real)
    if power > p_max * (1.0 + 1e-12):
        raise InfeasibleError(power, p_max)
    xi = math.nan
    trace = [(0, xi, float(amps.sum()), power)]
    for it in range(1, max_iter + 1):
        bounds = [
            penalty_upper_bound(user_rows[k], w, user_phases[k], r_min_k[k])
            for k in range(len(r_min_k))
        ]
        xi = default_penalty(bounds, reference_amplitude=float(np.mean(np.abs(amps))))
        new_amps = np.array(
            [update_amplitude(user_rows[k], w, user_phases[k], xi) for k in range(len(r_min_k))]
        )
        new_w = solve_weights_for_amplitudes(
            rows, new_amps, user_phases, eve_amplitude, eve_phase
        )
        new_power = float(np.vdot(new_w, new_w).real)
        if new_power > p_max * (1.0 + 1e-12):
            break
        gain = new_amps.sum() - amps.sum()
        amps, w, power = new_amps, new_w, new_power
        trace.append((it, xi, float(amps.sum()), power))
        if abs(gain) < tol:
            break
    return PenaltyState(
        xi=xi,
        amplitudes=amps,
        weights=w,
        p_min=power,
        trace=tuple(trace),
    )
