"""Rate, bit-error, rank, and spatial response evaluation.

Rates use the variance upper bound, so they are lower bounds on what the
receiver actually sees. Bit-error rates come in two flavors: the printed
closed form over per-symbol amplitudes and decision angles, evaluated
literally, and a Monte Carlo decoder that demodulates noisy received points
against a nominal constellation with Gray-coded bit counting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .channel import LinkBudget, aggregate_los_channel, irs_rx_steering, los_channels
from .geometry import CartesianCoord, Scene
from .phase_opt import wrap_angle

Z95 = 1.959963984540054


def q_function(x) -> np.ndarray:
    """Standard Gaussian complementary CDF."""
    return ndtr(-np.asarray(x, dtype=float))


@dataclass(frozen=True)
class RateReport:
    """Per-user SNR lower bounds and rates for one symbol."""

    snr: np.ndarray  # (K,) linear
    rate: np.ndarray  # (K,) bits/s/Hz

    @property
    def sum_rate(self) -> float:
        return float(self.rate.sum())


def snr_and_rate(channel: np.ndarray, weights: np.ndarray, z_bound: float) -> tuple[float, float]:
    """SNR t^2 / z and the rate lower bound log2(1 + SNR) for one receiver."""
    if z_bound <= 0.0:
        raise ValueError("variance bound must be positive")
    t = abs(complex(np.asarray(channel) @ np.asarray(weights)))
    snr = t * t / z_bound
    return snr, math.log2(1.0 + snr)


def rate_report(amplitudes: np.ndarray, z_bounds: np.ndarray) -> RateReport:
    """Rates from stored amplitudes and per-user variance bounds."""
    amplitudes = np.asarray(amplitudes, dtype=float)
    z = np.asarray(z_bounds, dtype=float)
    snr = amplitudes**2 / z
    return RateReport(snr=snr, rate=np.log2(1.0 + snr))


def ber_analytic(amplitudes, angles, n0: float) -> float:
    """Literal closed-form bit-error rate over four received symbols.

    Each term is Q(L_i^2 * sin(alpha_i) / (N0/2)) with L_i the received
    amplitude and alpha_i the smallest angle between the received vector and
    a decision axis.
    """
    if n0 <= 0.0:
        raise ValueError("noise spectral density must be positive")
    l = np.asarray(amplitudes, dtype=float)
    a = np.asarray(angles, dtype=float)
    if l.shape != a.shape:
        raise ValueError("amplitudes and angles must align")
    return float(np.mean(q_function(l**2 * np.sin(a) / (n0 / 2.0))))


def qpsk_ber_reference(snr_bit: float) -> float:
    """Textbook Gray-coded QPSK bit-error rate Q(sqrt(2 * Eb/N0))."""
    return float(q_function(math.sqrt(2.0 * snr_bit)))


def gray_code(symbols: np.ndarray) -> np.ndarray:
    return symbols ^ (symbols >> 1)


def _bit_count(values: np.ndarray) -> np.ndarray:
    counts = np.zeros_like(values)
    v = values.copy()
    while np.any(v):
        counts += v & 1
        v >>= 1
    return counts


@dataclass(frozen=True)
class BerEntry:
    receiver: str
    n0: float
    ber: float
    ci_halfwidth: float
    trials: int


def ber_monte_carlo(
    noiseless_symbols: np.ndarray,
    decision_phases: np.ndarray,
    noise_variances,
    trials: int,
    rng: np.random.Generator,
    receiver: str = "user",
    n0: float = 0.0,
) -> BerEntry:
    """Monte Carlo bit-error rate for one receiver.

    Symbols are drawn uniformly, disturbed by complex Gaussian noise of the
    per-symbol variance, and demodulated by minimum angular distance to the
    decision constellation. Bits are compared under Gray mapping. The
    confidence halfwidth is the 95% normal approximation.
    """
    y0 = np.asarray(noiseless_symbols, dtype=complex)
    order = len(y0)
    bits = int(round(math.log2(order)))
    if 2**bits != order:
        raise ValueError("constellation order must be a power of two")
    var = np.broadcast_to(np.asarray(noise_variances, dtype=float), (order,))
    sent = rng.integers(0, order, size=trials)
    y = y0[sent]
    sigma = np.sqrt(var[sent] / 2.0)
    if np.any(var > 0.0):
        y = y + sigma * (rng.standard_normal(trials) + 1j * rng.standard_normal(trials))
    angles = np.angle(y)
    dist = np.abs(wrap_angle(angles[:, None] - np.asarray(decision_phases)[None, :]))
    decided = np.argmin(dist, axis=1)
    errors = _bit_count(gray_code(sent) ^ gray_code(decided))
    total_bits = trials * bits
    ber = float(errors.sum()) / total_bits
    halfwidth = Z95 * math.sqrt(max(ber * (1.0 - ber), 0.0) / total_bits)
    return BerEntry(receiver=receiver, n0=n0, ber=ber, ci_halfwidth=halfwidth, trials=trials)


@dataclass(frozen=True)
class DofReport:
    """Numerical ranks of the stacked end-to-end channels and their bounds."""

    eve_rank: int
    users_rank: int
    eve_limit: int
    users_limit: int

    @property
    def eve_bound_ok(self) -> bool:
        return self.eve_rank <= self.eve_limit

    @property
    def users_bound_ok(self) -> bool:
        return self.users_rank <= self.users_limit


def _numerical_rank(matrix: np.ndarray, rel_tol: float = 1e-9) -> int:
    s = np.linalg.svd(matrix, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rel_tol * s[0]))


def dof_check(
    scene: Scene,
    budget: LinkBudget,
    phases: np.ndarray,
    eve_antennas: int = 4,
    antenna_spacing_m: float | None = None,
) -> DofReport:
    """Rank bounds of the deterministic channels seen by the scene's receivers.

    The eavesdropper is modeled as a compact line of antennas along y around
    its position: the panel legs use exact per-antenna spherical-wave
    steering, while the direct leg applies plane-wave offsets so it stays a
    strict rank-one stack. The user stack uses each user's own channels.
    """
    if eve_antennas < 1:
        raise ValueError("eavesdropper needs at least one antenna")
    channels = los_channels(scene, budget)
    spacing = antenna_spacing_m if antenna_spacing_m is not None else scene.wavelength_m / 2.0
    offsets = (np.arange(eve_antennas) - (eve_antennas - 1) / 2.0) * spacing
    coeff = np.exp(1j * np.asarray(phases))

    # Direction of the direct transmitter-to-eavesdropper link for the
    # plane-wave phase offsets across the small array.
    delta = scene.eve.as_array() - scene.uav.as_array()
    k_hat = delta / np.linalg.norm(delta)
    eve_rows = []
    for off in offsets:
        pos = CartesianCoord(scene.eve.x, scene.eve.y + off, scene.eve.z)
        link = scene.receiver_link_spherical(pos)
        a, b = irs_rx_steering(link, scene.panel, scene.wavelength_m)
        h_r = np.kron(a, b)
        loss = channels.eve.loss
        cascade = loss.zeta1 * loss.upsilon1 * ((h_r * coeff) @ channels.g_bar)
        shift = np.exp(1j * 2.0 * np.pi * (k_hat @ np.array([0.0, off, 0.0])) / scene.wavelength_m)
        direct = loss.zeta3 * shift * channels.eve.h_a_bar
        eve_rows.append(cascade + direct)
    user_rows = [aggregate_los_channel(channels, phases, u) for u in channels.users]
    return DofReport(
        eve_rank=_numerical_rank(np.asarray(eve_rows)),
        users_rank=_numerical_rank(np.asarray(user_rows)),
        eve_limit=2,
        users_limit=1 + scene.k_u,
    )


@dataclass(frozen=True)
class BeamMap:
    """Received-power map over a ground grid, in dBm, with receiver markers."""

    x: np.ndarray  # (cells,)
    y: np.ndarray  # (cells,)
    power_dbm: np.ndarray  # (cells, cells) indexed [iy, ix]
    users_xy: tuple[tuple[float, float], ...]
    eve_xy: tuple[float, float]

    def power_at(self, x: float, y: float) -> float:
        ix = int(np.argmin(np.abs(self.x - x)))
        iy = int(np.argmin(np.abs(self.y - y)))
        return float(self.power_dbm[iy, ix])


def beam_response_map(
    scene: Scene,
    budget: LinkBudget,
    phases: np.ndarray,
    weights: np.ndarray,
    extent_m: float = 25.0,
    cells: int = 64,
    floor_dbm: float = -300.0,
) -> BeamMap:
    """Received power |h_los w|^2 for a virtual receiver in each ground cell.

    Each cell reuses the exact same channel construction as a real receiver
    at that position, so the map is consistent with the designed amplitudes.
    """
    if cells < 2 or extent_m <= 0.0:
        raise ValueError("grid needs positive extent and at least two cells")
    from .channel import _receiver_channel  # same construction as real receivers

    channels = los_channels(scene, budget)
    xs = np.linspace(0.0, extent_m, cells)
    ys = np.linspace(0.0, extent_m, cells)
    ground_z = scene.irs_origin.z - scene.irs_height_m
    phases = np.asarray(phases, dtype=float)
    power = np.empty((cells, cells))
    w = np.asarray(weights)
    floor_lin = 10 ** (floor_dbm / 10.0)
    for iy, yv in enumerate(ys):
        for ix, xv in enumerate(xs):
            pos = CartesianCoord(float(xv), float(yv), ground_z)
            rx = _receiver_channel(scene, pos, budget)
            h = aggregate_los_channel(channels, phases, rx)
            p = abs(complex(h @ w)) ** 2
            power[iy, ix] = 10.0 * math.log10(p) if p > floor_lin else floor_dbm
    return BeamMap(
        x=xs,
        y=ys,
        power_dbm=power,
        users_xy=tuple((u.x, u.y) for u in scene.users),
        eve_xy=(scene.eve.x, scene.eve.y),
    )
