"""
Linear array geometry, embedded element factors and steering phases.

Angles are radians throughout: ``theta`` is the polar angle from the
z-axis (vertical) and ``phi`` the azimuth from the x-axis (array
broadside). Arrays lie along the y-axis, centred on the origin.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegenerateGeometry, InvalidParam

__all__ = [
    "C0",
    "ArrayGeometry",
    "ElementFactor",
    "Direction",
    "make_ula",
    "direction_unit",
    "steering_phase",
    "steering_phases",
]

C0 = 299_792_458.0  # m/s
MIN_LINK_DISTANCE = 1e-9  # m


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    """Transmit array: ``T`` element positions (metres) plus carrier frequency."""

    element_count: int
    spacing: float
    carrier_freq: float
    positions: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.shape != (self.element_count, 3):
            raise InvalidParam(f"positions must have shape ({self.element_count}, 3), got {pos.shape}")
        if self.spacing <= 0 or self.carrier_freq <= 0:
            raise InvalidParam("spacing and carrier frequency must be positive")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "_on_y_axis", bool(np.all(pos[:, [0, 2]] == 0.0)))

    @property
    def wavelength(self):
        return C0 / self.carrier_freq

    @property
    def wavenumber(self):
        return 2.0 * np.pi * self.carrier_freq / C0

    @property
    def y(self):
        """Element coordinates along the array axis."""
        return self.positions[:, 1]

    @property
    def aperture(self):
        return float(np.ptp(self.y)) if self.element_count > 1 else 0.0

    def is_uniform_linear(self, rtol=1e-9):
        p = self.positions
        if np.any(np.abs(p[:, [0, 2]]) > rtol * max(self.spacing, 1.0)):
            return False
        if self.element_count == 1:
            return True
        return bool(np.allclose(np.diff(p[:, 1]), self.spacing, rtol=rtol, atol=0.0))


def make_ula(T, d, f):
    """
    Uniform linear array of ``T`` elements spaced ``d`` metres on the y-axis.

    Element ``t`` (0-based) sits at ``(0, (t - (T - 1) / 2) * d, 0)`` so the
    centroid is the origin.
    """
    if int(T) != T or T < 1:
        raise InvalidParam(f"element count must be a positive integer, got {T!r}")
    if not d > 0 or not f > 0:
        raise InvalidParam(f"spacing and frequency must be positive, got d={d!r}, f={f!r}")
    T = int(T)
    offsets = np.arange(T) - (T - 1) / 2.0
    pos = np.zeros((T, 3))
    pos[:, 1] = offsets * d
    return ArrayGeometry(T, float(d), float(f), pos)


class Direction(NamedTuple):
    theta: float
    phi: float


def direction_unit(theta, phi=None):
    """
    Unit vector ``(sin(theta) cos(phi), sin(theta) sin(phi), cos(theta))``.

    Accepts a :class:`Direction` or separate (broadcastable) angle arrays;
    the result has a trailing axis of length 3.
    """
    if phi is None:
        theta, phi = theta
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    st = np.sin(theta)
    return np.stack(np.broadcast_arrays(st * np.cos(phi), st * np.sin(phi), np.cos(theta)), axis=-1)


@dataclass(frozen=True)
class ElementFactor:
    """
    Embedded element pattern shared by every element and both polarizations.

    ``kind="isotropic"`` radiates unit gain everywhere. ``kind="cosine_power"``
    radiates ``cos(phi) ** exponent * sin(theta) ** elevation_exponent`` in
    the front half-space (``cos(phi) > 0``) and nothing behind; the
    elevation exponent defaults to ``exponent``, which gives the familiar
    ``(sin(theta) cos(phi)) ** q`` element. Gains never exceed 1 and peak
    at broadside.
    """

    kind: str = "isotropic"
    exponent: float = 0.0
    elevation_exponent: float = None

    def __post_init__(self):
        if self.kind not in ("isotropic", "cosine_power"):
            raise InvalidParam(f"unknown element kind {self.kind!r}")
        if self.elevation_exponent is None:
            object.__setattr__(self, "elevation_exponent", self.exponent)
        if self.exponent < 0 or self.elevation_exponent < 0:
            raise InvalidParam("cosine exponents must be >= 0")

    @classmethod
    def isotropic(cls):
        return cls("isotropic", 0.0, 0.0)

    @classmethod
    def cosine(cls, q, q_elevation=None):
        return cls("cosine_power", float(q), None if q_elevation is None else float(q_elevation))

    def __call__(self, theta, phi, pol=0):
        """Element gain at ``(theta, phi)``; both polarizations share one pattern."""
        theta = np.asarray(theta, dtype=float)
        phi = np.asarray(phi, dtype=float)
        if self.kind == "isotropic":
            return np.ones(np.broadcast_shapes(theta.shape, phi.shape))
        c = np.cos(phi)
        s = np.abs(np.sin(theta))
        return np.where(c > 0, np.abs(c) ** self.exponent * s ** self.elevation_exponent, 0.0)

    @property
    def peaks_on_horizon(self):
        """True when, at fixed ``sin(theta) sin(phi)``, the gain is largest at ``theta = pi/2``."""
        # |cos(phi)| and sin(theta) both grow as sin(theta) -> 1 along a cone of constant u
        return True

    def to_dict(self):
        return {"kind": self.kind, "exponent": self.exponent, "elevation_exponent": self.elevation_exponent}


def steering_phases(geometry, rx_pos):
    """
    Phases ``k * rho_t . (rho_r - rho_t) / |rho_r - rho_t|`` for every element.

    Returns an array of shape ``(T,)`` for a single receiver or ``(R, T)``
    when ``rx_pos`` has shape ``(R, 3)``. Values are not wrapped.
    """
    rx = np.asarray(rx_pos, dtype=float)
    single = rx.ndim == 1
    rx = np.atleast_2d(rx)
    rho_t = geometry.positions
    if geometry._on_y_axis:
        # rho_t = (0, y_t, 0): rho_t . (rho_r - rho_t) = y_t (y_r - y_t)
        y = rho_t[:, 1]
        dy = rx[:, 1:2] - y
        dist = np.sqrt((rx[:, 0] ** 2 + rx[:, 2] ** 2)[:, None] + dy * dy)
        num = dy * y
    else:
        # expanded form avoids an (R, T, 3) temporary
        cross = rx @ rho_t.T
        own = np.sum(rho_t * rho_t, axis=1)
        dist = np.sqrt(np.maximum(np.sum(rx * rx, axis=1)[:, None] - 2.0 * cross + own, 0.0))
        num = cross - own
    if np.any(dist < MIN_LINK_DISTANCE):
        raise DegenerateGeometry("receiver coincides with a transmit element")
    phase = geometry.wavenumber * num / dist
    return phase[0] if single else phase


def steering_phase(geometry, t, rx_pos):
    """Steering phase of element ``t`` (0-based) towards ``rx_pos``."""
    if not 0 <= t < geometry.element_count:
        raise InvalidParam(f"element index {t} out of range")
    rho_t = geometry.positions[t]
    diff = np.asarray(rx_pos, dtype=float) - rho_t
    dist = float(np.linalg.norm(diff))
    if dist < MIN_LINK_DISTANCE:
        raise DegenerateGeometry("receiver coincides with a transmit element")
    return geometry.wavenumber * float(rho_t @ diff) / dist
