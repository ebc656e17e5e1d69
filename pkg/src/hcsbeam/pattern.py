"""
Far-field patterns on regular angular grids.

A pattern holds one complex field component per transmit polarization port
(V then H), so ``values`` has shape ``(2, n_theta, n_phi)``. The radiated
power density at a node is the sum of the squared magnitudes of the two
components, since the ports radiate orthogonally polarized fields.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionMismatch, InvalidParam
from .geometry import direction_unit

__all__ = [
    "AngularGrid",
    "SectorSpec",
    "FarFieldPattern",
    "array_manifold",
    "radiate",
    "radiate_at",
    "PatternIntegrator",
    "split_ports",
]

N_POL = 2


@dataclass(frozen=True, eq=False)
class AngularGrid:
    """
    Tensor grid of polar angles ``theta`` and azimuths ``phi`` (radians).

    ``dtheta`` and ``dphi`` are the quadrature cell sizes; the midpoint rule
    weights every node by ``sin(theta) * dtheta * dphi``.
    """

    theta: np.ndarray
    phi: np.ndarray
    dtheta: float = None
    dphi: float = None

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=float)
        ph = np.asarray(self.phi, dtype=float)
        if th.ndim != 1 or ph.ndim != 1:
            raise InvalidParam("grid axes must be one-dimensional")
        if th.size > 1 and np.any(np.diff(th) <= 0) or ph.size > 1 and np.any(np.diff(ph) <= 0):
            raise InvalidParam("grid axes must be strictly increasing")
        if np.any(th < 0) or np.any(th > np.pi) or np.any(ph < -np.pi) or np.any(ph > np.pi):
            raise InvalidParam("grid nodes outside theta in [0, pi], phi in [-pi, pi]")
        th.setflags(write=False)
        ph.setflags(write=False)
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "phi", ph)
        if self.dtheta is None:
            object.__setattr__(self, "dtheta", np.pi / th.size)
        if self.dphi is None:
            object.__setattr__(self, "dphi", 2 * np.pi / ph.size)

    @classmethod
    def midpoint(cls, n_theta=361, n_phi=721):
        """Cell-centred grid over the whole sphere; odd counts put nodes on theta=pi/2 and phi=0."""
        if n_theta < 3 or n_phi < 8:
            raise InvalidParam("need n_theta >= 3 and n_phi >= 8")
        dth = np.pi / n_theta
        dph = 2 * np.pi / n_phi
        theta = (np.arange(n_theta) + 0.5) * dth
        phi = -np.pi + (np.arange(n_phi) + 0.5) * dph
        return cls(theta, phi, dth, dph)

    @property
    def shape(self):
        return (self.theta.size, self.phi.size)

    def mesh(self):
        return np.meshgrid(self.theta, self.phi, indexing="ij")

    @cached_property
    def weights(self):
        w = np.sin(self.theta)[:, None] * self.dtheta * self.dphi
        return np.broadcast_to(w, self.shape)

    @property
    def covers_sphere(self):
        return (
            np.isclose(self.theta.size * self.dtheta, np.pi)
            and np.isclose(self.phi.size * self.dphi, 2 * np.pi)
        )

    def horizon_index(self):
        """Index of the theta row at exactly pi/2, or None."""
        idx = int(np.argmin(np.abs(self.theta - np.pi / 2)))
        return idx if abs(self.theta[idx] - np.pi / 2) < 1e-12 else None

    def same_as(self, other):
        return (
            self is other
            or self.theta.shape == other.theta.shape
            and self.phi.shape == other.phi.shape
            and np.array_equal(self.theta, other.theta)
            and np.array_equal(self.phi, other.phi)
        )


@dataclass(frozen=True)
class SectorSpec:
    """Closed angular cell ``theta_min <= theta <= theta_max``, ``phi_min <= phi <= phi_max``."""

    theta_min: float
    theta_max: float
    phi_min: float
    phi_max: float

    def __post_init__(self):
        if not (self.theta_min < self.theta_max and self.phi_min < self.phi_max):
            raise InvalidParam("sector needs min < max in theta and phi")
        if self.theta_min < 0 or self.theta_max > np.pi or self.phi_min < -np.pi or self.phi_max > np.pi:
            raise InvalidParam("sector bounds outside the valid angle ranges")

    @classmethod
    def azimuth(cls, phi_min, phi_max):
        """Full-elevation sector between two azimuths."""
        return cls(0.0, np.pi, phi_min, phi_max)

    @classmethod
    def from_degrees(cls, theta_min=0.0, theta_max=180.0, phi_min=-60.0, phi_max=60.0):
        return cls(*np.deg2rad([theta_min, theta_max, phi_min, phi_max]))

    @classmethod
    def whole_sphere(cls):
        return cls(0.0, np.pi, -np.pi, np.pi)

    def contains(self, theta, phi):
        theta = np.asarray(theta)
        phi = np.asarray(phi)
        return (
            (theta >= self.theta_min)
            & (theta <= self.theta_max)
            & (phi >= self.phi_min)
            & (phi <= self.phi_max)
        )

    def mask(self, grid):
        th, ph = grid.mesh()
        return self.contains(th, ph)

    def coverage(self, grid):
        """
        Fraction of each grid cell lying inside the sector.

        Cells are ``theta +- dtheta/2`` by ``phi +- dphi/2``; edge cells get
        partial weight so sector integrals converge at the midpoint-rule
        rate even when a boundary cuts through a cell.
        """

        def overlap(x, h, lo, hi):
            f = np.clip((np.minimum(x + h / 2, hi) - np.maximum(x - h / 2, lo)) / h, 0.0, 1.0)
            # snap round-off so whole cells stay whole
            f[f > 1.0 - 1e-9] = 1.0
            f[f < 1e-9] = 0.0
            return f

        ft = overlap(grid.theta, grid.dtheta, self.theta_min, self.theta_max)
        fp = overlap(grid.phi, grid.dphi, self.phi_min, self.phi_max)
        return ft[:, None] * fp[None, :]

    def to_degrees(self):
        return tuple(float(v) for v in np.rad2deg([self.theta_min, self.theta_max, self.phi_min, self.phi_max]))


@dataclass(frozen=True, eq=False)
class FarFieldPattern:
    """Complex field per polarization port sampled on ``grid``."""

    grid: AngularGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128)
        if v.shape != (N_POL,) + self.grid.shape:
            raise DimensionMismatch(f"pattern values {v.shape} do not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidParam("pattern values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def power(self):
        """Power density ``|A_V|^2 + |A_H|^2`` per node."""
        return (np.abs(self.values) ** 2).sum(axis=0)

    @property
    def magnitude(self):
        return np.sqrt(self.power)

    def scaled(self, c):
        return FarFieldPattern(self.grid, self.values * c)


def split_ports(w):
    """View a ``(2T, ...)`` excitation array as ``(T, 2, ...)``; port index is fastest in the flat layout."""
    w = np.asarray(w)
    if w.shape[0] % N_POL:
        raise DimensionMismatch("excitation length must be even (two ports per element)")
    return w.reshape((w.shape[0] // N_POL, N_POL) + w.shape[1:])


def array_manifold(geometry, element, theta, phi):
    """
    Element-weighted phase terms ``E(theta, phi) * exp(j k rho_t . u)``.

    Returns an array of shape ``angles.shape + (T,)``.
    """
    u = direction_unit(theta, phi)
    phase = geometry.wavenumber * (u @ geometry.positions.T)
    gain = element(np.asarray(theta), np.asarray(phi))
    return gain[..., None] * np.exp(1j * phase)


def radiate_at(w, geometry, element, theta, phi):
    """
    Field components radiated by excitation(s) ``w`` in the given directions.

    ``w`` has shape ``(2T,)`` or ``(2T, B)``; the result has shape
    ``(2,) + angles.shape`` or ``(2,) + angles.shape + (B,)``.
    """
    w = np.asarray(w, dtype=np.complex128)
    if w.shape[0] != N_POL * geometry.element_count:
        raise DimensionMismatch(f"excitation length {w.shape[0]} != 2T = {N_POL * geometry.element_count}")
    ports = split_ports(w)  # (T, 2, ...)
    manifold = array_manifold(geometry, element, theta, phi)  # (..., T)
    return np.stack([np.tensordot(manifold, ports[:, p], axes=([-1], [0])) for p in range(N_POL)])


def radiate(w, geometry, element, grid):
    """Far-field pattern of one excitation vector over a full angular grid."""
    th, ph = grid.mesh()
    return FarFieldPattern(grid, radiate_at(w, geometry, element, th, ph))


class PatternIntegrator:
    """
    Pattern-power integrals as Hermitian quadratic forms in the excitations.

    For a port excitation ``v`` the midpoint-rule integral of
    ``|E|^2 |sum_t v_t exp(j k rho_t . u)|^2`` over the grid equals
    ``v^H K v`` with ``K = S^H diag(c) S``; ``K_out`` weights ``c`` by the
    fraction of each cell lying outside ``sector``. Both kernels are built once per
    geometry/element/grid/sector and reproduce the grid quadrature exactly
    up to round-off.
    """

    def __init__(self, geometry, element, grid, sector=None):
        self.geometry = geometry
        self.element = element
        self.grid = grid
        self.sector = sector
        th, ph = grid.mesh()
        gain2 = element(th, ph) ** 2
        c = grid.weights * gain2
        self.kernel = self._kernel(c)
        if sector is not None:
            self.kernel_out = self._kernel(c * (1.0 - sector.coverage(grid)))
        else:
            self.kernel_out = None
        self._cut = None
        h = grid.horizon_index()
        if h is not None and element.peaks_on_horizon:
            # peak search restricted to the horizon row, where the gain is largest for every u
            self._cut = array_manifold(geometry, element, grid.theta[h], grid.phi)  # (n_phi, T)

    def _kernel(self, c):
        geo = self.geometry
        th, ph = self.grid.mesh()
        T = geo.element_count
        if geo.is_uniform_linear():
            u = np.sin(th) * np.sin(ph)
            z = np.exp(1j * geo.wavenumber * geo.spacing * u)
            lags = np.empty(T, dtype=np.complex128)
            acc = np.ones_like(z)
            for m in range(T):
                lags[m] = np.sum(c * acc)
                acc *= z
            # K[t, t'] depends on t' - t only
            idx = np.arange(T)[None, :] - np.arange(T)[:, None]
            return np.where(idx >= 0, lags[np.abs(idx)], lags[np.abs(idx)].conj())
        K = np.zeros((T, T), dtype=np.complex128)
        for i in range(th.shape[0]):
            s = array_manifold(geo, _Unit, th[i], ph[i])
            K += (s.conj().T * c[i]) @ s
        return K

    def _forms(self, K, w):
        ports = split_ports(np.asarray(w, dtype=np.complex128))
        x = ports.reshape(ports.shape[0], -1)
        vals = np.sum(x.conj() * (K @ x), axis=0).real
        return vals.reshape(ports.shape[1:]).sum(axis=0)

    def total_power(self, w):
        """Integral of the radiated power over the grid, per excitation column."""
        return self._forms(self.kernel, w)

    def out_of_sector_power(self, w):
        if self.kernel_out is None:
            raise InvalidParam("integrator was built without a sector")
        return self._forms(self.kernel_out, w)

    def interference_ratio(self, w):
        return self.out_of_sector_power(w) / self.total_power(w)

    def peak_power(self, w):
        """Largest node power density, searched on the horizon cut when the element allows it."""
        w = np.asarray(w, dtype=np.complex128)
        if self._cut is None:
            th, ph = self.grid.mesh()
            vals = radiate_at(w, self.geometry, self.element, th, ph)
            return (np.abs(vals) ** 2).sum(axis=0).reshape((-1,) + w.shape[1:]).max(axis=0)
        ports = split_ports(w)
        vals = np.stack([self._cut @ ports[:, p] for p in range(N_POL)])
        return (np.abs(vals) ** 2).sum(axis=0).max(axis=0)

    def directivity(self, w):
        """Linear peak directivity ``4 pi max|A|^2 / integral |A|^2``."""
        return 4 * np.pi * self.peak_power(w) / self.total_power(w)


class _UnitElement:
    def __call__(self, theta, phi, pol=0):
        return np.ones(np.broadcast_shapes(np.shape(theta), np.shape(phi)))


_Unit = _UnitElement()
