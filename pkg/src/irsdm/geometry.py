"""Scene geometry: coordinate frames, panel layout, and element-range math.

Conventions used throughout the package:

* The reflecting panel's reference element is the scene origin. Panel
  element (h, v) sits at offset (0, h*d, v*d) in the panel frame, i.e. the
  panel spans a local Y (horizontal) by Z (vertical) grid facing the y > 0
  half-space.
* Every link is described by the spherical angles of its propagation
  direction (transmitter toward receiver), with the depression measured as a
  polar angle from +z. Links pointing below the horizon therefore have
  depression > pi/2. For the transmitter-to-panel link the direction runs
  from the airborne array down to the panel, which keeps its azimuth inside
  [0, pi] whenever the transmitter hovers on the y <= 0 side of the panel.
* Cartesian coordinates are the canonical internal representation; spherical
  ones appear only at configuration boundaries and when extracting steering
  angles.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SphericalCoord:
    """Link direction and range: polar depression, azimuth, distance in meters."""

    depression: float
    azimuth: float
    range_m: float

    def __post_init__(self):
        if not 0.0 <= self.depression <= math.pi:
            raise ValueError(f"depression {self.depression} outside [0, pi]")
        if not 0.0 <= self.azimuth <= math.pi:
            raise ValueError(f"azimuth {self.azimuth} outside [0, pi]")
        if not self.range_m > 0.0:
            raise ValueError(f"range {self.range_m} must be positive")


@dataclass(frozen=True)
class CartesianCoord:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise ValueError("cartesian components must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)


@dataclass(frozen=True)
class Panel:
    """Rectangular reflecting panel: m_y horizontal by m_z vertical elements."""

    m_y: int
    m_z: int
    spacing_m: float

    def __post_init__(self):
        if self.m_y < 1 or self.m_z < 1:
            raise ValueError("panel needs at least one element per axis")
        if not self.spacing_m > 0.0:
            raise ValueError("element spacing must be positive")

    @property
    def m(self) -> int:
        return self.m_y * self.m_z


@dataclass(frozen=True)
class Ula:
    """Uniform linear transmit array along the global z axis."""

    n: int
    spacing_m: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("array needs at least one element")
        if not self.spacing_m > 0.0:
            raise ValueError("array spacing must be positive")


@dataclass(frozen=True)
class AngleBox:
    """Feasible depression/azimuth window for the transmitter-to-panel link."""

    depression_min: float
    depression_max: float
    azimuth_min: float
    azimuth_max: float

    def __post_init__(self):
        if self.depression_min > self.depression_max:
            raise ValueError("depression bounds out of order")
        if self.azimuth_min > self.azimuth_max:
            raise ValueError("azimuth bounds out of order")


def spherical_to_cartesian(s: SphericalCoord, origin: CartesianCoord) -> CartesianCoord:
    """Point at the given direction and range from ``origin``."""
    st = math.sin(s.depression)
    return CartesianCoord(
        origin.x + s.range_m * st * math.cos(s.azimuth),
        origin.y + s.range_m * st * math.sin(s.azimuth),
        origin.z + s.range_m * math.cos(s.depression),
    )


def cartesian_to_spherical(point: CartesianCoord, origin: CartesianCoord) -> SphericalCoord:
    """Inverse of :func:`spherical_to_cartesian`.

    The point must lie in the y >= origin.y half-space so that the azimuth
    stays inside [0, pi]; tiny negative azimuths from rounding are clamped.
    """
    dx, dy, dz = point.x - origin.x, point.y - origin.y, point.z - origin.z
    r = math.sqrt(dx * dx + dy * dy + dz * dz)
    if r == 0.0:
        raise ValueError("point coincides with origin")
    depression = math.acos(max(-1.0, min(1.0, dz / r)))
    azimuth = math.atan2(dy, dx)
    if -1e-12 <= azimuth < 0.0:
        azimuth = 0.0
    return SphericalCoord(depression, azimuth, r)


def fraunhofer_distance(aperture_m: float, wavelength_m: float) -> float:
    """Near/far-field boundary 2*D^2/lambda for an aperture of size D."""
    if aperture_m <= 0.0 or wavelength_m <= 0.0:
        raise ValueError("aperture and wavelength must be positive")
    return 2.0 * aperture_m * aperture_m / wavelength_m


def irs_element_ranges(receiver: SphericalCoord, panel: Panel) -> tuple[np.ndarray, np.ndarray]:
    """Exact distances from each panel axis element to the receiver.

    Returns (vertical ranges, horizontal ranges) of lengths (m_z, m_y). The
    zeroth entry of each equals the reference-element range; the rest follow
    the law of cosines for elements offset along the panel's z and y axes.
    """
    if receiver.range_m <= 0.0:
        raise ValueError("receiver range must be positive")
    r = receiver.range_m
    d = panel.spacing_m
    v = np.arange(panel.m_z, dtype=float)
    h = np.arange(panel.m_y, dtype=float)
    # Projections of the unit link direction onto the panel's z and y axes.
    cos_v = math.cos(receiver.depression)
    cos_h = math.sin(receiver.azimuth) * math.sin(receiver.depression)
    r_v = np.sqrt(r * r + (v * d) ** 2 - 2.0 * r * v * d * cos_v)
    r_h = np.sqrt(r * r + (h * d) ** 2 - 2.0 * r * h * d * cos_h)
    return r_v, r_h


@dataclass(frozen=True)
class Scene:
    """Static deployment: transmitter, panel, ground receivers, and bounds."""

    uav: CartesianCoord
    irs_origin: CartesianCoord
    users: tuple[CartesianCoord, ...]
    eve: CartesianCoord
    uav_height_m: float
    irs_height_m: float
    panel: Panel
    ula: Ula
    wavelength_m: float
    angle_box: AngleBox

    def __post_init__(self):
        if len(self.users) < 1:
            raise ValueError("scene needs at least one user")
        k_u, n, m = len(self.users), self.ula.n, self.panel.m
        if not (k_u < n < m):
            raise ValueError(
                f"scene must satisfy K_u < N < M, got K_u={k_u}, N={n}, M={m}"
            )
        if self.uav_height_m <= 0.0 or self.irs_height_m <= 0.0:
            raise ValueError("heights must be positive")
        if self.wavelength_m <= 0.0:
            raise ValueError("wavelength must be positive")

    @property
    def k_u(self) -> int:
        return len(self.users)

    @property
    def n(self) -> int:
        return self.ula.n

    @property
    def m(self) -> int:
        return self.panel.m

    def uav_link_spherical(self) -> SphericalCoord:
        """Angles/range of the transmitter-to-panel link (points at the panel)."""
        return cartesian_to_spherical(self.irs_origin, self.uav)

    def receiver_link_spherical(self, position: CartesianCoord) -> SphericalCoord:
        """Angles/range of the panel-to-receiver link."""
        return cartesian_to_spherical(position, self.irs_origin)

    def direct_link_spherical(self, position: CartesianCoord) -> SphericalCoord:
        """Angles/range of the transmitter-to-receiver link."""
        return cartesian_to_spherical(position, self.uav)

    def receivers(self) -> tuple[CartesianCoord, ...]:
        return self.users + (self.eve,)

    def with_uav_xy(self, x: float, y: float) -> "Scene":
        return dataclasses.replace(self, uav=CartesianCoord(x, y, self.uav.z))


def clamp_to_angle_box(scene: Scene, x: float, y: float) -> tuple[float, float]:
    """Project a candidate transmitter x-y onto the scene's angle box.

    At fixed altitude the box is an annular sector in the horizontal plane
    (the depression bounds fix the radius band around the panel, the azimuth
    bounds the sector). The candidate's polar angle is clamped to the nearest
    sector edge and its radius is taken along the clamped ray (the planar
    projection onto the sector), then clamped into the radius band. Requires
    a box whose depressions point below the horizon (cos < 0), otherwise no
    point at the fixed altitude can satisfy it.
    """
    dz = scene.irs_origin.z - scene.uav.z
    if dz >= 0.0:
        raise ValueError("transmitter must sit above the panel reference")
    box = scene.angle_box
    if math.cos(box.depression_max) >= -1e-12:
        raise ValueError(
            "angle box admits no point at the fixed transmitter altitude "
            "(its depressions do not point downward)"
        )
    height = -dz
    rho_min = height * math.tan(math.pi - box.depression_max)
    rho_max = (
        height * math.tan(math.pi - box.depression_min)
        if math.cos(box.depression_min) < -1e-12
        else math.inf
    )
    # Feasible position angles: the link azimuth is the position angle + pi.
    a_lo = box.azimuth_min + math.pi
    a_hi = box.azimuth_max + math.pi
    cx, cy = x - scene.irs_origin.x, y - scene.irs_origin.y
    rho_c = math.hypot(cx, cy)
    phi_c = math.atan2(cy, cx)
    mid = 0.5 * (a_lo + a_hi)
    phi_c = phi_c - TWO_PI * math.floor((phi_c - mid + math.pi) / TWO_PI)
    phi = min(max(phi_c, a_lo), a_hi)
    if phi != phi_c:
        rho_c = max(0.0, rho_c * math.cos(phi_c - phi))
    rho = min(max(rho_c, rho_min), rho_max)
    return (
        scene.irs_origin.x + rho * math.cos(phi),
        scene.irs_origin.y + rho * math.sin(phi),
    )


def inside_angle_box(scene: Scene, x: float, y: float, atol: float = 1e-9) -> bool:
    """True when the transmitter at (x, y, fixed z) satisfies the angle box.

    Total over the plane: candidates whose link direction leaves the
    spherical domain are simply infeasible.
    """
    dx, dy, dz = scene.irs_origin.x - x, scene.irs_origin.y - y, scene.irs_origin.z - scene.uav.z
    r = math.sqrt(dx * dx + dy * dy + dz * dz)
    if r == 0.0:
        return False
    depression = math.acos(max(-1.0, min(1.0, dz / r)))
    azimuth = math.atan2(dy, dx)
    box = scene.angle_box
    return (
        box.depression_min - atol <= depression <= box.depression_max + atol
        and box.azimuth_min - atol <= azimuth <= box.azimuth_max + atol
    )
