"""
Synthetic geometry-based stochastic channels and a free-space oracle.

Matrices have shape ``(2R, 2T)``: row ``2 r + chi`` is receiver ``r`` on
polarization ``chi`` and column ``2 t + psi`` is element ``t`` on port
``psi``, with V (0) before H (1). An entry is the transfer coefficient
``g`` such that the received amplitude is ``sum_(t, psi) g * w``.

Every receiver of every scenario draws its clusters from its own Philox
substream keyed by ``(seed, p, r)``, so ensembles are reproducible and
adding receivers or elements leaves the existing draws untouched.
"""

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometry, InvalidParam
from .geometry import MIN_LINK_DISTANCE, ElementFactor, direction_unit
from .pattern import SectorSpec

__all__ = [
    "ReceiverLayout",
    "ChannelConfig",
    "ChannelEnsemble",
    "random_layout",
    "free_space_channel",
    "generate_scenario",
    "generate_ensemble",
    "write_ensemble",
    "read_ensemble",
    "substream",
]

_STREAM_CHANNEL = 0
_STREAM_LAYOUT = 1
_MAGIC = b"HCSCHAN\x00"
_VERSION = 1
_HEADER = struct.Struct("<8sIIIIdd")


def substream(seed, *key):
    """Independent Philox generator for ``(seed, *key)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, key)])))


@dataclass(frozen=True, eq=False)
class ReceiverLayout:
    positions: np.ndarray

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise InvalidParam(f"receiver positions must have shape (R, 3), got {pos.shape}")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def R(self):
        return self.positions.shape[0]

    def azimuths(self):
        return np.arctan2(self.positions[:, 1], self.positions[:, 0])

    def check_inside(self, sector):
        phi = self.azimuths()
        if np.any((phi < sector.phi_min) | (phi > sector.phi_max)):
            raise InvalidParam("receiver outside the coverage sector")


def random_layout(R, sector, seed, range_m=(50.0, 200.0), bs_height=10.0, rx_height=1.5):
    """
    Place ``R`` terminals at uniform azimuths inside ``sector``.

    Horizontal ranges are uniform in ``range_m``; the array centre is the
    origin, so terminals sit ``bs_height - rx_height`` metres below it.
    Each terminal uses its own substream, so growing ``R`` keeps earlier
    terminals in place.
    """
    if R < 1:
        raise InvalidParam("need at least one receiver")
    pos = np.empty((R, 3))
    for r in range(R):
        rng = substream(seed, _STREAM_LAYOUT, r)
        phi = rng.uniform(sector.phi_min, sector.phi_max)
        rho = rng.uniform(*range_m)
        pos[r] = (rho * np.cos(phi), rho * np.sin(phi), rx_height - bs_height)
    return ReceiverLayout(pos)


@dataclass(frozen=True)
class ChannelConfig:
    """
    Stochastic channel parameters.

    ``rician_k_db`` only applies to ``synthetic_los``; ``inf`` leaves the
    pure free-space component. ``xpr_db = inf`` removes cross-polar leakage.

    Cluster departure azimuths are uniform over ``cluster_azimuth_deg``,
    by default the whole front half-space. ``None`` confines them to the
    coverage sector, which leaves almost no out-of-sector energy for any
    precoder to suppress.
    """

    model: str = "synthetic_nlos"
    cluster_count: int = 20
    rician_k_db: float = 9.0
    xpr_db: float = 8.0
    seed: int = 0
    P: int = 100
    elevation_spread_deg: float = 10.0
    cluster_azimuth_deg: tuple = (-90.0, 90.0)

    def cluster_azimuth_span(self, sector):
        if self.cluster_azimuth_deg is None:
            return sector.phi_min, sector.phi_max
        return tuple(np.deg2rad(self.cluster_azimuth_deg))

    def __post_init__(self):
        if self.cluster_azimuth_deg is not None:
            lo, hi = self.cluster_azimuth_deg
            if not -180.0 <= lo < hi <= 180.0:
                raise InvalidParam("cluster azimuth span must satisfy -180 <= lo < hi <= 180")
            object.__setattr__(self, "cluster_azimuth_deg", (float(lo), float(hi)))
        if self.model not in ("synthetic_nlos", "synthetic_los"):
            raise InvalidParam(f"unknown channel model {self.model!r}")
        if self.cluster_count < 1 or self.P < 1:
            raise InvalidParam("cluster_count and P must be >= 1")
        if not 0 <= self.elevation_spread_deg <= 90:
            raise InvalidParam("elevation spread must lie in [0, 90] degrees")
        if np.isnan(self.xpr_db) or np.isnan(self.rician_k_db):
            raise InvalidParam("XPR and K-factor must not be NaN")


@dataclass(frozen=True, eq=False)
class ChannelEnsemble:
    """``P`` channel matrices of shape ``(2R, 2T)`` plus array metadata."""

    matrices: np.ndarray
    carrier_freq: float
    spacing: float

    @property
    def P(self):
        return self.matrices.shape[0]

    @property
    def R(self):
        return self.matrices.shape[1] // 2

    @property
    def T(self):
        return self.matrices.shape[2] // 2

    def __iter__(self):
        return iter(self.matrices)

    def __len__(self):
        return self.P


def free_space_channel(geometry, layout, element=None):
    """
    Deterministic co-polar line-of-sight channel.

    Entry ``(r, chi), (t, psi)`` is ``delta(chi, psi) * lambda / (4 pi D)
    * exp(-j k D)`` with ``D = |rho_r - rho_t|``, optionally multiplied by
    the element gain towards the receiver.
    """
    diff = layout.positions[:, None, :] - geometry.positions[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    if np.any(dist < MIN_LINK_DISTANCE):
        raise DegenerateGeometry("receiver coincides with a transmit element")
    k = geometry.wavenumber
    g = geometry.wavelength / (4 * np.pi * dist) * np.exp(-1j * k * dist)
    if element is not None:
        theta = np.arccos(np.clip(diff[..., 2] / dist, -1.0, 1.0))
        phi = np.arctan2(diff[..., 1], diff[..., 0])
        g = g * element(theta, phi)
    R, T = g.shape
    out = np.zeros((R, 2, T, 2), dtype=np.complex128)
    out[:, 0, :, 0] = g
    out[:, 1, :, 1] = g
    return out.reshape(2 * R, 2 * T)


def _db_to_lin(x_db):
    return np.inf if np.isposinf(x_db) else 10.0 ** (x_db / 10.0)


def _nlos_rows(config, geometry, element, sector, p, R):
    lo, hi = config.cluster_azimuth_span(sector)
    L = config.cluster_count
    xpr = _db_to_lin(config.xpr_db)
    cross = 0.0 if np.isinf(xpr) else 1.0 / np.sqrt(xpr)
    pol_scale = np.array([[1.0, cross], [cross, 1.0]]) / np.sqrt(L)
    spread = np.deg2rad(config.elevation_spread_deg)
    T = geometry.element_count
    out = np.empty((R, 2, T, 2), dtype=np.complex128)
    for r in range(R):
        rng = substream(config.seed, _STREAM_CHANNEL, p, r)
        phi = rng.uniform(lo, hi, L)
        theta = np.pi / 2 - rng.uniform(-spread, spread, L)
        gains = (rng.standard_normal((2, 2, L)) + 1j * rng.standard_normal((2, 2, L))) / np.sqrt(2)
        gains *= pol_scale[..., None]
        u = direction_unit(theta, phi)
        steer = element(theta, phi)[:, None] * np.exp(1j * geometry.wavenumber * (u @ geometry.positions.T))
        # out[r, chi, t, psi] = sum_l gains[chi, psi, l] * steer[l, t]
        out[r] = np.einsum("cpl,lt->ctp", gains, steer)
    return out.reshape(2 * R, 2 * T)


def generate_scenario(config, geometry, layout, p, element=None, sector=None, los=None):
    """Channel matrix of scenario ``p`` (0-based), normalized to unit mean entry power."""
    element = element or ElementFactor.isotropic()
    sector = sector or SectorSpec.from_degrees()
    if config.model == "synthetic_los":
        k_lin = _db_to_lin(config.rician_k_db)
        if los is None:
            los = free_space_channel(geometry, layout, element)
        copol = los[0::2, 0::2]
        los_n = los / np.sqrt(np.mean(np.abs(copol) ** 2))
        if np.isinf(k_lin):
            g = los_n
        else:
            nlos = _nlos_rows(config, geometry, element, sector, p, layout.R)
            g = np.sqrt(k_lin / (k_lin + 1)) * los_n + np.sqrt(1 / (k_lin + 1)) * nlos
    else:
        g = _nlos_rows(config, geometry, element, sector, p, layout.R)
    power = np.mean(np.abs(g) ** 2)
    if not power > 0:
        raise InvalidParam("channel configuration produced an all-zero matrix")
    return g / np.sqrt(power)


def generate_ensemble(config, geometry, layout, element=None, sector=None, workers=1):
    """
    Draw ``config.P`` scenarios.

    Cluster departure azimuths follow ``config.cluster_azimuth_deg`` and
    elevations are uniform within ``elevation_spread_deg`` of the horizon.
    Scenario generation may be spread over ``workers`` threads; results do
    not depend on the worker count.
    """
    sector = sector or SectorSpec.from_degrees()
    element = element or ElementFactor.isotropic()
    layout.check_inside(sector)
    los = free_space_channel(geometry, layout, element) if config.model == "synthetic_los" else None

    def one(p):
        return generate_scenario(config, geometry, layout, p, element, sector, los)

    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            mats = list(pool.map(one, range(config.P)))
    else:
        mats = [one(p) for p in range(config.P)]
    return ChannelEnsemble(np.stack(mats), geometry.carrier_freq, geometry.spacing)


def write_ensemble(ensemble, path):
    """
    Write the flat binary replay format.

    Header ``<8sIIIIdd``: magic, version, P, R, T, carrier frequency (Hz),
    spacing (m); then ``P * 2R * 2T`` little-endian complex128 values
    (interleaved re/im doubles) in scenario, row, column order.
    """
    m = np.asarray(ensemble.matrices, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, ensemble.P, ensemble.R, ensemble.T,
                              float(ensemble.carrier_freq), float(ensemble.spacing)))
        fh.write(np.ascontiguousarray(m).tobytes())


def read_ensemble(path):
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise InvalidParam(f"{path}: truncated header")
        magic, version, P, R, T, f, d = _HEADER.unpack(head)
        if magic != _MAGIC:
            raise InvalidParam(f"{path}: not a channel ensemble file")
        if version != _VERSION:
            raise InvalidParam(f"{path}: unsupported version {version}")
        data = np.frombuffer(fh.read(), dtype="<c16")
    if data.size != P * 2 * R * 2 * T:
        raise InvalidParam(f"{path}: expected {P * 4 * R * T} values, found {data.size}")
    return ChannelEnsemble(data.reshape(P, 2 * R, 2 * T).astype(np.complex128), f, d)
