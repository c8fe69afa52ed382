"""Symbol-level precoding: sector margins and minimum-power weights.

Receivers decode a PSK symbol correctly as long as the received point stays
inside the symbol's decision sector (half-angle pi/B). The design backs the
target amplitude off by a margin so that, under Gaussian uncertainty of
variance bounded by z_k, the sector condition holds with probability at least
1 - gamma. With the margin folded in, each symbol reduces to a set of exact
complex equalities which the minimum-power weight vector satisfies with the
smallest possible norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtri

from .channel import LosChannelSet, aggregate_los_channel, noise_variance_upper_bound
from .errors import SingularChannelError

RANK_THRESHOLD = 1e-10


@dataclass(frozen=True)
class ConstellationSpec:
    """PSK constellation targets for users plus scrambled eavesdropper targets."""

    order: int
    user_phases: np.ndarray  # (B,) shared by every user
    eve_phases: np.ndarray  # (B,) disturbed phases
    eve_amplitude: float = 0.0

    def __post_init__(self):
        if self.order < 2:
            raise ValueError("constellation order must be at least 2")
        if self.eve_amplitude < 0.0:
            raise ValueError("eavesdropper amplitude must be nonnegative")
        if len(self.user_phases) != self.order or len(self.eve_phases) != self.order:
            raise ValueError("need one phase per symbol")

    @property
    def phase_deviation(self) -> float:
        """Maximum angular deviation pi/B tolerated inside a decision sector."""
        return math.pi / self.order

    @classmethod
    def psk(cls, order: int, rng: np.random.Generator, eve_amplitude: float = 0.0):
        """Gray-ready PSK grid at pi/B + 2*pi*b/B with seeded eavesdropper phases."""
        b = np.arange(order)
        user = (math.pi / order + 2.0 * math.pi * b / order) % (2.0 * math.pi)
        eve = rng.uniform(0.0, 2.0 * math.pi, size=order)
        return cls(order=order, user_phases=user, eve_phases=eve, eve_amplitude=eve_amplitude)


def ci_margin(gamma: float, deviation: float, z_bound) -> np.ndarray | float:
    """Amplitude back-off guaranteeing the sector condition at probability 1-gamma."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    z = np.asarray(z_bound, dtype=float)
    if np.any(z <= 0.0):
        raise ValueError("variance bound must be positive")
    out = ndtri(1.0 - gamma) * np.sqrt((1.0 + math.tan(deviation) ** 2) * z)
    return float(out) if np.isscalar(z_bound) else out


@dataclass(frozen=True)
class CiMargin:
    """Per-user margins and the resulting amplitude floors."""

    probability: float
    deltas: np.ndarray  # (K,)
    r_min: float
    r_min_k: np.ndarray  # (K,) r_min + delta/tan(deviation)

    @property
    def k_u(self) -> int:
        return len(self.deltas)


def ci_margins(
    channels: LosChannelSet,
    constellation: ConstellationSpec,
    r_min: float,
    gamma: float,
    p_max: float,
    noise_power: float,
) -> CiMargin:
    """Margins for every user from the per-user noise variance bounds."""
    z = np.array(
        [noise_variance_upper_bound(channels, u, p_max, noise_power) for u in channels.users]
    )
    deltas = ci_margin(gamma, constellation.phase_deviation, z)
    return CiMargin(
        probability=gamma,
        deltas=deltas,
        r_min=r_min,
        r_min_k=r_min + deltas / math.tan(constellation.phase_deviation),
    )


def min_power_weights(channel_rows: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Smallest-norm weight vector hitting every receiver's complex target.

    ``channel_rows`` stacks the effective row channels (K_u + 1, N) and
    ``targets`` the desired received symbols. Solved as the minimum-norm
    solution of the underdetermined linear system via an orthogonal
    decomposition; a numerically rank-deficient stack raises
    :class:`SingularChannelError`.
    """
    a = np.asarray(channel_rows, dtype=complex)
    c = np.asarray(targets, dtype=complex)
    if a.ndim != 2 or c.shape != (a.shape[0],):
        raise ValueError("channel stack and targets are inconsistently shaped")
    if a.shape[0] > a.shape[1]:
        raise ValueError(
            f"need at least as many antennas as constraints, got {a.shape[1]} < {a.shape[0]}"
        )
    singular = np.linalg.svd(a, compute_uv=False)
    if singular[-1] < RANK_THRESHOLD * singular[0]:
        raise SingularChannelError(float(singular[-1]), float(singular[0]), RANK_THRESHOLD)
    w, _, _, _ = np.linalg.lstsq(a, c, rcond=None)
    return w


def received_symbol(
    channel: np.ndarray,
    weights: np.ndarray,
    noise_variance: float = 0.0,
    rng: np.random.Generator | None = None,
) -> complex:
    """Received point h @ w, optionally with one complex Gaussian noise draw."""
    y = complex(np.asarray(channel) @ np.asarray(weights))
    if noise_variance > 0.0:
        if rng is None:
            raise ValueError("noise draw requires an rng")
        scale = math.sqrt(noise_variance / 2.0)
        y += complex(rng.normal(0.0, scale), rng.normal(0.0, scale))
    return y


@dataclass(frozen=True)
class PrecoderState:
    """Per-symbol weights and the amplitudes they deliver.

    ``powers`` are the per-symbol transmit powers; ``p_min`` reports the
    budget-binding symbol.
    """

    weights: np.ndarray  # (B, N) complex
    amplitudes: np.ndarray  # (B, K) user amplitudes
    eve_amplitudes: np.ndarray  # (B,)
    p_max: float

    @property
    def powers(self) -> np.ndarray:
        return np.einsum("bn,bn->b", self.weights, self.weights.conj()).real

    @property
    def p_min(self) -> float:
        return float(self.powers.max())


def scale_to_power(state: PrecoderState, p_max: float) -> PrecoderState:
    """Scale each symbol's weights to transmit at exactly p_max.

    Amplitudes (user and eavesdropper) scale by the same per-symbol factor;
    constraint phases are untouched.
    """
    if p_max <= 0.0:
        raise ValueError("p_max must be positive")
    norms = np.sqrt(state.powers)
    if np.any(norms == 0.0):
        raise ValueError("cannot scale a zero weight vector")
    factor = math.sqrt(p_max) / norms
    return replace(
        state,
        weights=state.weights * factor[:, None],
        amplitudes=state.amplitudes * factor[:, None],
        eve_amplitudes=state.eve_amplitudes * factor,
        p_max=p_max,
    )


def stack_channels(channels: LosChannelSet, phases: np.ndarray) -> np.ndarray:
    """Effective row channels for all users then the eavesdropper, (K_u+1, N)."""
    rows = [aggregate_los_channel(channels, phases, u) for u in channels.users]
    rows.append(aggregate_los_channel(channels, phases, channels.eve))
    return np.asarray(rows)


def symbol_targets(
    constellation: ConstellationSpec, margin: CiMargin, symbol: int
) -> np.ndarray:
    """Complex targets (users then eavesdropper) for one symbol index."""
    user = margin.r_min_k * np.exp(1j * constellation.user_phases[symbol])
    eve = constellation.eve_amplitude * np.exp(1j * constellation.eve_phases[symbol])
    return np.concatenate([user, [eve]])


def solve_min_power(
    channels: LosChannelSet,
    constellation: ConstellationSpec,
    margin: CiMargin,
    phases: np.ndarray,
    p_max: float,
    symbols=None,
) -> PrecoderState:
    """Minimum-power weights meeting the margin-adjusted targets per symbol."""
    if symbols is None:
        symbols = range(constellation.order)
    symbols = list(symbols)
    rows = stack_channels(channels, phases)
    weights = np.array([min_power_weights(rows, symbol_targets(constellation, margin, b)) for b in symbols])
    amplitudes = np.tile(margin.r_min_k, (len(symbols), 1))
    eve_amp = np.full(len(symbols), constellation.eve_amplitude, dtype=float)
    return PrecoderState(weights=weights, amplitudes=amplitudes, eve_amplitudes=eve_amp, p_max=p_max)
