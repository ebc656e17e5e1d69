"""
Performance indexes: per-beam capacity with intra-cell interference,
out-of-sector interference ratio and directivity.

Intra-cell interference for beam ``b`` is ``sum_(b' != b) |g_b^T w_b'|^2``,
the power the other beams leak onto receiver port ``b``. Zero forcing
drives it to zero.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InvalidParam, ZeroPattern
from .synthesis import beam_index

__all__ = [
    "NoiseModel",
    "MetricsReport",
    "beam_gains",
    "intra_cell_interference",
    "beam_capacity",
    "beam_capacities",
    "ensemble_capacity",
    "interference_ratio",
    "ensemble_interference",
    "aggregate_interference",
    "directivity",
    "to_db",
]

ZERO_POWER = 1e-300


def to_db(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(x)


@dataclass(frozen=True)
class NoiseModel:
    """Receiver noise power ``sigma2`` and total radiated power ``omega`` (watts)."""

    sigma2: float
    omega: float

    def __post_init__(self):
        if not (self.sigma2 > 0 and self.omega > 0):
            raise InvalidParam("sigma2 and omega must be positive")

    @classmethod
    def from_snr_db(cls, snr_db, omega=1.0):
        return cls(omega / 10.0 ** (snr_db / 10.0), omega)

    @property
    def snr_db(self):
        return 10.0 * np.log10(self.omega / self.sigma2)


@dataclass
class MetricsReport:
    """Ensemble results for one method at one configuration point."""

    method: str
    fingerprint: str
    C_ave: float
    I_ave_db: float
    I_mean_db: float
    D_ave_db: float
    tau_s: float
    C_beam: np.ndarray
    I_beam_db: np.ndarray
    D_beam_db: np.ndarray
    point: dict = field(default_factory=dict)


def _check(G, W):
    G = np.asarray(G)
    W = np.asarray(W)
    if G.ndim != 2 or W.ndim != 2 or G.shape[1] != W.shape[0] or G.shape[0] != W.shape[1]:
        raise DimensionMismatch(f"channel {G.shape} and excitation set {W.shape} are incompatible")
    return G, W


def beam_gains(G, W):
    """Matrix ``Y = G W``; ``Y[b, b']`` couples beam ``b'`` into receiver port ``b``."""
    G, W = _check(G, W)
    return G @ W


def _interference(Y):
    # zero the own-beam term rather than subtracting it, which would cancel tiny ZF residues
    p = np.abs(Y) ** 2
    np.fill_diagonal(p, 0.0)
    return p.sum(axis=1)


def intra_cell_interference(G, W, beam):
    """Power leaked onto the ``(r, chi)`` receiver port by all other beams."""
    Y = beam_gains(G, W)
    b = beam_index(beam)
    row = np.abs(Y[b]) ** 2
    row[b] = 0.0
    return float(row.sum())


def _capacity(signal, mu, noise, R):
    return np.log2(1.0 + signal / (mu + 2 * R * noise.sigma2 / noise.omega))


def beam_capacity(G, W, beam, noise, R=None):
    """``log2(1 + |g^T w|^2 / (mu + 2R sigma^2 / omega))`` in bps/Hz."""
    G, W = _check(G, W)
    R = G.shape[0] // 2 if R is None else R
    b = beam_index(beam)
    signal = float(np.abs(G[b] @ W[:, b]) ** 2)
    return float(_capacity(signal, intra_cell_interference(G, W, beam), noise, R))


def beam_capacities(G, W, noise):
    """Capacities of all ``2R`` beams of one scenario."""
    Y = beam_gains(G, W)
    R = Y.shape[0] // 2
    signal = np.abs(np.diag(Y)) ** 2
    return _capacity(signal, _interference(Y), noise, R)


def ensemble_capacity(channels, excitation_sets, noise):
    """
    Average sum-rate capacity over scenarios.

    Returns ``(C_ave, C_beam)`` where ``C_beam`` is the per-beam average
    across scenarios.
    """
    if len(channels) != len(excitation_sets) or len(channels) == 0:
        raise DimensionMismatch("need one excitation set per scenario")
    per_beam = np.stack([beam_capacities(G, W, noise) for G, W in zip(channels, excitation_sets)])
    return float(per_beam.sum(axis=1).mean()), per_beam.mean(axis=0)


def interference_ratio(pattern, sector):
    """Fraction of radiated power outside ``sector`` (midpoint quadrature, partial edge cells)."""
    grid = pattern.grid
    if not grid.covers_sphere:
        raise InvalidParam("interference ratio needs a grid over the whole sphere")
    dens = pattern.power * grid.weights
    total = dens.sum()
    if not total > ZERO_POWER:
        raise ZeroPattern("pattern radiates no power")
    out = (dens * (1.0 - sector.coverage(grid))).sum()
    return float(out / total)


def aggregate_interference(ratios):
    """
    Combine a ``(P, 2R)`` array of linear ratios.

    Returns ``(I_ave_db, I_beam_db, I_mean_db)``: the dB value of the
    scenario average of the per-scenario sum over beams, the dB value of
    each beam's scenario average, and the dB value of the per-beam mean.
    """
    ratios = np.atleast_2d(np.asarray(ratios, dtype=float))
    per_scenario = ratios.sum(axis=1)
    beam_avg = ratios.mean(axis=0)
    return float(to_db(per_scenario.mean())), to_db(beam_avg), float(to_db(beam_avg.mean()))


def ensemble_interference(patterns, sector):
    """Out-of-sector interference from ``patterns[p][b]``; see :func:`aggregate_interference`."""
    ratios = [[interference_ratio(a, sector) for a in beams] for beams in patterns]
    return aggregate_interference(ratios)[:2]


def directivity(pattern, direction=None):
    """
    Directivity ``4 pi |A|^2 / integral |A|^2`` in dB.

    By default ``|A|^2`` is the peak over the grid; pass ``direction`` as
    ``(theta, phi)`` to use the nearest grid node instead.
    """
    grid = pattern.grid
    p = pattern.power
    total = float((p * grid.weights).sum())
    if not total > ZERO_POWER:
        raise ZeroPattern("pattern radiates no power")
    if direction is None:
        peak = float(p.max())
    else:
        i = int(np.argmin(np.abs(grid.theta - direction[0])))
        j = int(np.argmin(np.abs(grid.phi - direction[1])))
        peak = float(p[i, j])
    return float(to_db(4 * np.pi * peak / total))
