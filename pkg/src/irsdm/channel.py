"""Line-of-sight channel synthesis and uncertainty statistics.

The deterministic channel from the airborne array to a ground receiver is the
cascade through the reflecting panel plus the direct path,

    h_los = zeta1 * upsilon1 * (h_r_bar^T Phi G_bar) + zeta3 * h_a_bar^T,

built from unit-modulus steering vectors weighted by free-space path-loss
amplitudes. Scattered (non-line-of-sight) components are never synthesized by
the optimizers; they only enter through closed-form variance expressions and
through Monte Carlo draws inside evaluators.

Sign convention for the panel receive steering: entry m carries phase
2*pi*(r_ref - r_m)/lambda so the reference element has phase zero and the
far-range limit reduces to the plane-wave progression.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Panel, Scene, SphericalCoord, irs_element_ranges


@dataclass(frozen=True)
class LinkBudget:
    """Propagation constants shared by every link in a scene.

    ``rho`` is the channel power gain at unit distance and the ``los_ratio``
    fields are the line-of-sight power fractions per link class. The panel
    leg uses an unsquared distance law by default; set
    ``squared_irs_pathloss`` to use inverse-square on that leg as well.
    """

    rho: float
    los_ratio_uav_irs: float
    los_ratio_irs_rx: float
    los_ratio_uav_rx: float
    noise_power: float
    squared_irs_pathloss: bool = False

    def __post_init__(self):
        for name in ("los_ratio_uav_irs", "los_ratio_irs_rx", "los_ratio_uav_rx"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.rho <= 0.0:
            raise ValueError("rho must be positive")
        if self.noise_power < 0.0:
            raise ValueError("noise power must be nonnegative")


@dataclass(frozen=True)
class PathLossSet:
    """Amplitude coefficients splitting each link into LoS and NLoS parts."""

    rho: float
    alpha_uav_irs: float
    alpha_irs_rx: float
    alpha_uav_rx: float
    eps_uav_irs: float
    eps_irs_rx: float
    eps_uav_rx: float

    @property
    def zeta1(self) -> float:
        return np.sqrt(self.alpha_irs_rx * self.eps_irs_rx)

    @property
    def zeta2(self) -> float:
        return np.sqrt(self.alpha_irs_rx * (1.0 - self.eps_irs_rx))

    @property
    def zeta3(self) -> float:
        return np.sqrt(self.alpha_uav_rx * self.eps_uav_rx)

    @property
    def zeta4(self) -> float:
        return np.sqrt(self.alpha_uav_rx * (1.0 - self.eps_uav_rx))

    @property
    def upsilon1(self) -> float:
        return np.sqrt(self.alpha_uav_irs * self.eps_uav_irs)

    @property
    def upsilon2(self) -> float:
        return np.sqrt(self.alpha_uav_irs * (1.0 - self.eps_uav_irs))


@dataclass(frozen=True)
class ReceiverChannel:
    """Per-receiver LoS steering vectors plus path-loss amplitudes."""

    h_r_bar: np.ndarray  # (M,) panel-to-receiver steering
    h_a_bar: np.ndarray  # (N,) direct transmitter-to-receiver steering
    loss: PathLossSet


@dataclass(frozen=True)
class LosChannelSet:
    """All LoS quantities for one scene: shared cascade plus per-receiver legs."""

    g_bar: np.ndarray  # (M, N) rank-one transmitter-to-panel matrix
    users: tuple[ReceiverChannel, ...]
    eve: ReceiverChannel

    @property
    def m(self) -> int:
        return self.g_bar.shape[0]

    @property
    def n(self) -> int:
        return self.g_bar.shape[1]

    @property
    def k_u(self) -> int:
        return len(self.users)

    def all_receivers(self) -> tuple[ReceiverChannel, ...]:
        return self.users + (self.eve,)


def ula_steering(theta: float, n: int, spacing_m: float, wavelength_m: float) -> np.ndarray:
    """Plane-wave steering of an n-element line array, entry 0 = 1."""
    if n < 1:
        raise ValueError("steering vector needs at least one element")
    phase = 2.0 * np.pi * spacing_m * np.cos(theta) / wavelength_m
    return np.exp(1j * phase * np.arange(n))


def irs_tx_steering(
    theta: float, phi: float, panel: Panel, wavelength_m: float
) -> tuple[np.ndarray, np.ndarray]:
    """Far-field panel steering for the transmitter-to-panel link.

    Returns (vertical, horizontal) factors of lengths (m_z, m_y): the vertical
    progression follows cos(theta), the horizontal one sin(phi)*sin(theta).
    """
    k = 2.0 * np.pi * panel.spacing_m / wavelength_m
    a = np.exp(1j * k * np.cos(theta) * np.arange(panel.m_z))
    b = np.exp(1j * k * np.sin(phi) * np.sin(theta) * np.arange(panel.m_y))
    return a, b


def irs_rx_steering(
    receiver: SphericalCoord, panel: Panel, wavelength_m: float
) -> tuple[np.ndarray, np.ndarray]:
    """Spherical-wave panel steering for the panel-to-receiver link.

    Entry m carries phase 2*pi*(r_ref - r_m)/lambda from the exact per-element
    ranges, so nearby receivers see a curved phase front while distant ones
    recover the linear progression of :func:`irs_tx_steering`.
    """
    r_v, r_h = irs_element_ranges(receiver, panel)
    k = 2.0 * np.pi / wavelength_m
    a = np.exp(1j * k * (receiver.range_m - r_v))
    b = np.exp(1j * k * (receiver.range_m - r_h))
    return a, b


def path_losses(scene: Scene, position, budget: LinkBudget) -> PathLossSet:
    """Free-space amplitude coefficients for the three legs serving a receiver."""
    d_uav_irs = float(np.linalg.norm(scene.uav.as_array() - scene.irs_origin.as_array()))
    d_irs_rx = float(np.linalg.norm(position.as_array() - scene.irs_origin.as_array()))
    d_uav_rx = float(np.linalg.norm(position.as_array() - scene.uav.as_array()))
    if min(d_uav_irs, d_irs_rx, d_uav_rx) <= 0.0:
        raise ValueError("path-loss distances must be positive")
    irs_exponent = 2.0 if budget.squared_irs_pathloss else 1.0
    return PathLossSet(
        rho=budget.rho,
        alpha_uav_irs=budget.rho / d_uav_irs**2,
        alpha_irs_rx=budget.rho / d_irs_rx**irs_exponent,
        alpha_uav_rx=budget.rho / d_uav_rx**2,
        eps_uav_irs=budget.los_ratio_uav_irs,
        eps_irs_rx=budget.los_ratio_irs_rx,
        eps_uav_rx=budget.los_ratio_uav_rx,
    )


def _receiver_channel(scene: Scene, position, budget: LinkBudget) -> ReceiverChannel:
    link = scene.receiver_link_spherical(position)
    a, b = irs_rx_steering(link, scene.panel, scene.wavelength_m)
    direct = scene.direct_link_spherical(position)
    h_a = ula_steering(direct.depression, scene.ula.n, scene.ula.spacing_m, scene.wavelength_m)
    return ReceiverChannel(
        h_r_bar=np.kron(a, b),
        h_a_bar=h_a,
        loss=path_losses(scene, position, budget),
    )


def los_channels(scene: Scene, budget: LinkBudget) -> LosChannelSet:
    """Build the full LoS channel set for a scene."""
    link = scene.uav_link_spherical()
    h_uav_irs = ula_steering(link.depression, scene.ula.n, scene.ula.spacing_m, scene.wavelength_m)
    a, b = irs_tx_steering(link.depression, link.azimuth, scene.panel, scene.wavelength_m)
    g_bar = np.outer(np.kron(a, b), h_uav_irs)
    users = tuple(_receiver_channel(scene, u, budget) for u in scene.users)
    eve = _receiver_channel(scene, scene.eve, budget)
    return LosChannelSet(g_bar=g_bar, users=users, eve=eve)


def aggregate_los_channel(
    channels: LosChannelSet, phases: np.ndarray, receiver: ReceiverChannel
) -> np.ndarray:
    """Effective LoS row channel (length N) under panel phases ``phases``."""
    phases = np.asarray(phases, dtype=float)
    if phases.shape != (channels.m,):
        raise ValueError(f"expected {channels.m} panel phases, got shape {phases.shape}")
    loss = receiver.loss
    cascade = (receiver.h_r_bar * np.exp(1j * phases)) @ channels.g_bar
    return loss.zeta1 * loss.upsilon1 * cascade + loss.zeta3 * receiver.h_a_bar


def effective_noise_variance(
    channels: LosChannelSet,
    receiver: ReceiverChannel,
    weights: np.ndarray,
    noise_power: float,
) -> float:
    """Variance of the summed scatter leakage plus thermal noise for one symbol.

    Closed form over i.i.d. unit-variance complex Gaussian scatter components;
    the panel phases drop out because the reflection matrix is unitary.
    """
    loss = receiver.loss
    w = np.asarray(weights)
    gw = channels.g_bar @ w
    m = channels.m
    scatter = (
        0.5 * m * (loss.zeta2 * loss.upsilon2) ** 2
        + loss.zeta4**2
        + m * (loss.zeta1 * loss.upsilon2) ** 2
    )
    return float(
        (loss.zeta2 * loss.upsilon1) ** 2 * np.vdot(gw, gw).real
        + scatter * np.vdot(w, w).real
        + noise_power
    )


def noise_variance_upper_bound(
    channels: LosChannelSet,
    receiver: ReceiverChannel,
    p_max: float,
    noise_power: float,
) -> float:
    """Weight-independent bound on :func:`effective_noise_variance`.

    Valid for weights with ||w||^2 <= p_max whose cascade beam power
    ||G_bar w||^2 stays below N * p_max.
    """
    if p_max <= 0.0:
        raise ValueError("p_max must be positive")
    loss = receiver.loss
    m, n = channels.m, channels.n
    coeff = (
        (loss.zeta2 * loss.upsilon1) ** 2 * n / m
        + 0.5 * (loss.zeta2 * loss.upsilon2) ** 2
        + loss.zeta4**2 / m
        + (loss.zeta1 * loss.upsilon2) ** 2
    )
    return float(coeff * m * p_max + noise_power)


@dataclass(frozen=True)
class EffectiveNoise:
    """Uncertainty statistics for one receiver and symbol."""

    variance: float
    upper_bound: float
    thermal: float


def noise_profile(
    channels: LosChannelSet,
    receiver: ReceiverChannel,
    weights: np.ndarray,
    p_max: float,
    noise_power: float,
) -> EffectiveNoise:
    return EffectiveNoise(
        variance=effective_noise_variance(channels, receiver, weights, noise_power),
        upper_bound=noise_variance_upper_bound(channels, receiver, p_max, noise_power),
        thermal=noise_power,
    )
