"""
Beam synthesis: zero forcing, isophoric steering and the hybrid
capacity/sidelobe (HCS) trade-off.

Excitation sets are ``(2T, 2R)`` complex arrays. Column ``2 r + chi`` is
the beam serving polarization ``chi`` of receiver ``r``; row ``2 t + psi``
drives port ``psi`` of element ``t``.

HCS builds, for each beam, the zero-forcing pattern and the isophoric
pattern, keeps the former inside the coverage sector and the latter
outside, and recovers excitations from the spliced pattern with a
Woodward-Lawson fit on ``T`` azimuth samples of the horizon cut.
"""

import csv
import warnings

import numpy as np
from scipy.linalg import LinAlgError, blas, cholesky

from .errors import (
    BeamSynthesisError,
    DimensionMismatch,
    ElementFactorNull,
    GridMismatch,
    InvalidParam,
    VisibleRegionOverflow,
    ZeroVector,
)
from .geometry import ElementFactor, steering_phases
from .linalg import as_complex_matrix, pseudo_inverse
from .pattern import N_POL, AngularGrid, FarFieldPattern, PatternIntegrator, array_manifold

__all__ = [
    "beam_index",
    "normalize_power",
    "zf_excitation_set",
    "iso_excitation",
    "iso_excitation_set",
    "hybrid_pattern",
    "wl_sample_angles",
    "wl_excitation",
    "wl_synthesis",
    "HcsSynthesizer",
    "hcs_excitation_set",
    "write_excitations_csv",
    "read_excitations_csv",
]

ELEMENT_NULL = 1e-6


def beam_index(beam):
    """Column of beam ``(r, chi)`` in an excitation set."""
    r, chi = beam
    if chi not in (0, 1) or r < 0:
        raise InvalidParam(f"bad beam id {beam!r}")
    return N_POL * r + chi


def _default_omega(n_beams, omega):
    return float(n_beams) if omega is None else float(omega)


def normalize_power(w, omega, R):
    """
    Scale excitation(s) so each has ``||w||^2 = omega / (2R)``.

    ``w`` may be one vector or a ``(2T, B)`` set normalized column-wise.
    """
    w = np.asarray(w, dtype=np.complex128)
    if omega <= 0 or R < 1:
        raise InvalidParam("omega must be positive and R >= 1")
    norm2 = np.sum(np.abs(w) ** 2, axis=0)
    if np.any(norm2 == 0) or not np.all(np.isfinite(norm2)):
        raise ZeroVector("cannot normalize a zero excitation")
    return w * np.sqrt(omega / (2 * R) / norm2)


def zf_excitation_set(G, omega=None):
    """
    Zero-forcing set ``W = G^+``, each beam normalized to ``omega / (2R)``.

    ``omega`` defaults to ``2R``, i.e. unit power per beam.
    """
    G = as_complex_matrix(G)
    n_beams = G.shape[0]
    if n_beams % N_POL or G.shape[1] % N_POL:
        raise DimensionMismatch("channel dimensions must be even (two polarizations)")
    W = pseudo_inverse(G)
    return normalize_power(W, _default_omega(n_beams, omega), n_beams // N_POL)


def _conj_phasors(phase):
    """``exp(-j phase)`` as a C-ordered array; cheaper than a complex ``exp``."""
    out = np.empty(phase.shape, dtype=np.complex128)
    np.cos(phase, out=out.real)
    np.sin(phase, out=out.imag)
    np.negative(out.imag, out=out.imag)
    return out


def iso_excitation_set(geometry, rx_positions, omega=None, normalize=True):
    """
    Isophoric excitations steering each beam at its receiver.

    The co-polar port of element ``t`` carries ``exp(-j Phi_tr)``, the
    conjugate of the steering phase, so that the radiated field adds in
    phase towards ``rho_r``; cross-polar ports are zero.
    """
    rx = np.atleast_2d(np.asarray(rx_positions, dtype=float))
    R = rx.shape[0]
    T = geometry.element_count
    steer = _conj_phasors(steering_phases(geometry, rx).T)  # (T, R)
    W = np.zeros((T, N_POL, R, N_POL), dtype=np.complex128)
    W[:, 0, :, 0] = steer
    W[:, 1, :, 1] = steer
    W = W.reshape(N_POL * T, N_POL * R)
    if not normalize:
        return W
    return normalize_power(W, _default_omega(N_POL * R, omega), R)


def iso_excitation(geometry, rx_pos, beam, omega=None, R=1, normalize=True):
    """Isophoric excitation of a single ``(r, chi)`` beam aimed at ``rx_pos``."""
    _, chi = beam
    w = iso_excitation_set(geometry, rx_pos, normalize=False)[:, chi]
    if not normalize:
        return w
    return normalize_power(w, _default_omega(N_POL * R, omega), R)


def hybrid_pattern(A_C, A_I, sector):
    """Field equal to ``A_C`` on sector nodes (boundary included) and ``A_I`` elsewhere."""
    if not A_C.grid.same_as(A_I.grid):
        raise GridMismatch("hybrid pattern needs both patterns on the same grid")
    mask = sector.mask(A_C.grid)
    return FarFieldPattern(A_C.grid, np.where(mask, A_C.values, A_I.values))


def wl_sample_angles(geometry, warn=True):
    """
    Woodward-Lawson sample directions on the horizon cut.

    ``u_q = sin(phi_q) = (q - (T-1)/2) * lambda / (T d)`` for
    ``q = 0 .. T-1``; samples with ``|u_q| > 1`` are invisible and dropped.

    Returns
    -------
    theta, phi, u : ndarray
        Sample polar angles (all ``pi/2``), azimuths and direction sines.
    """
    if not geometry.is_uniform_linear():
        raise InvalidParam("Woodward-Lawson sampling needs a uniform linear array")
    T = geometry.element_count
    u = (np.arange(T) - (T - 1) / 2.0) * geometry.wavelength / (T * geometry.spacing)
    visible = np.abs(u) <= 1.0 + 1e-12
    if not np.all(visible):
        if warn:
            warnings.warn(
                f"{np.count_nonzero(~visible)} of {T} Woodward-Lawson samples lie outside the visible region",
                VisibleRegionOverflow,
                stacklevel=2,
            )
        u = u[visible]
    u = np.clip(u, -1.0, 1.0)
    return np.full(u.shape, np.pi / 2), np.arcsin(u), u


def _wl_operator(geometry, element, theta_q, phi_q, u_q):
    gain = element(theta_q, phi_q)
    if np.any(np.abs(gain) < ELEMENT_NULL):
        raise ElementFactorNull("element factor vanishes at a Woodward-Lawson sample")
    # w_t = (1/T) sum_q (A_q / E_q) exp(-j k y_t u_q)
    kernel = np.exp(-1j * geometry.wavenumber * np.outer(geometry.y, u_q))
    return kernel / (gain[None, :] * geometry.element_count)


def wl_synthesis(samples, geometry, element, angles=None):
    """
    Woodward-Lawson excitations from per-port pattern samples.

    ``samples`` has shape ``(2, Q)`` or ``(2, Q, B)`` and holds the V and H
    field components at :func:`wl_sample_angles`. Returns ``(2T,)`` or
    ``(2T, B)`` excitations whose pattern reproduces every sample.
    """
    theta_q, phi_q, u_q = angles if angles is not None else wl_sample_angles(geometry)
    samples = np.asarray(samples, dtype=np.complex128)
    if samples.shape[:2] != (N_POL, u_q.size):
        raise DimensionMismatch(f"expected samples of shape (2, {u_q.size}, ...), got {samples.shape}")
    op = _wl_operator(geometry, element, theta_q, phi_q, u_q)
    ports = np.stack([np.tensordot(op, samples[p], axes=([1], [0])) for p in range(N_POL)], axis=1)
    return ports.reshape((N_POL * geometry.element_count,) + samples.shape[2:])


def wl_excitation(target, geometry, element=None, beam=(0, 0)):
    """
    Woodward-Lawson excitation for one beam.

    ``target`` is either a callable ``target(theta, phi)`` returning the
    co-polar field, an array of ``Q`` co-polar samples at
    :func:`wl_sample_angles`, or a ``(2, Q)`` array of per-port samples.
    A co-polar target leaves the cross-polar port at zero.
    """
    element = element or ElementFactor.isotropic()
    angles = wl_sample_angles(geometry)
    theta_q, phi_q, _ = angles
    if callable(target):
        target = target(theta_q, phi_q)
    target = np.asarray(target, dtype=np.complex128)
    if target.ndim == 1:
        samples = np.zeros((N_POL, target.size), dtype=np.complex128)
        samples[beam[1]] = target
    else:
        samples = target
    return wl_synthesis(samples, geometry, element, angles)


class HcsSynthesizer:
    """
    HCS synthesis with the geometry-dependent pieces precomputed.

    Build once per array/element/grid/sector, then call :meth:`synthesize`
    per channel realization.

    The ISO half of the splice depends only on the receiver positions. With
    ``cache_layout=True`` it is computed once per layout and reused across
    channel realizations; results are identical either way.
    """

    def __init__(self, geometry, element, sector, grid=None, integrator=None, cache_layout=True):
        self.geometry = geometry
        self.cache_layout = cache_layout
        self._iso_cache = (None, None)
        self.element = element
        self.sector = sector
        self.grid = grid or AngularGrid.midpoint()
        self.integrator = integrator or PatternIntegrator(geometry, element, self.grid, sector)
        self.angles = wl_sample_angles(geometry)
        theta_q, phi_q, u_q = self.angles
        self.in_sector = sector.contains(theta_q, phi_q)
        self.sample_manifold = array_manifold(geometry, element, theta_q, phi_q)  # (Q, T)
        self.wl_operator = _wl_operator(geometry, element, theta_q, phi_q, u_q)  # (T, Q)
        out = ~self.in_sector
        self._s_out = np.ascontiguousarray(self.sample_manifold[out])
        self._wl_out = np.ascontiguousarray(self.wl_operator[:, out])
        K = self.integrator.kernel
        # an element pattern even in azimuth makes the power kernel real; a real
        # kernel can act on the re/im parts directly at a quarter of the cost
        self._kernel_real = K.real.copy() if np.abs(K.imag).max() <= 1e-12 * np.abs(K).max() else None
        # x^T K x = |x^T L|^2 with K = L L^T; a triangular product halves the work
        self._kernel_chol = None
        if self._kernel_real is not None:
            try:
                self._kernel_chol = cholesky(self._kernel_real, lower=True)
            except LinAlgError:
                pass
        if u_q.size == geometry.element_count:
            # every sample is visible: WL(samples(w)) == w, so only the
            # out-of-sector samples need touching
            self._in_map = None
        else:
            inside = self.in_sector
            self._in_map = self.wl_operator[:, inside] @ self.sample_manifold[inside]

    def _quadratic_forms(self, x):
        """Column-wise ``x^H K x`` for ``x`` of shape ``(T, N)``."""
        if self._kernel_real is None:
            K = self.integrator.kernel
            return np.sum(x.conj() * (K @ x), axis=0).real
        xr = np.ascontiguousarray(x).view(np.float64)  # (T, 2N), re/im interleaved
        if self._kernel_chol is not None:
            y = blas.dtrmm(1.0, self._kernel_chol, xr.T, side=1, lower=1)
            q = np.einsum("ij,ij->i", y, y)
        else:
            q = np.einsum("ij,ij->j", xr, self._kernel_real @ xr)
        return q[0::2] + q[1::2]

    def synthesize(self, G, rx_positions, omega=None):
        """HCS excitation set ``(2T, 2R)`` for channel ``G`` and receiver positions ``(R, 3)``."""
        G = as_complex_matrix(G)
        n_beams = G.shape[0]
        T = self.geometry.element_count
        rx = np.atleast_2d(np.asarray(rx_positions, dtype=float))
        if N_POL * rx.shape[0] != n_beams:
            raise DimensionMismatch("receiver layout does not match the channel matrix")
        if G.shape[1] != N_POL * T:
            raise DimensionMismatch(f"channel has {G.shape[1]} columns, array has {N_POL * T} ports")
        W_C = pseudo_inverse(G)
        iso = self._iso_correction(rx)  # (T, R)
        zf = W_C.reshape(T, N_POL * n_beams)  # columns (port, beam)
        power = self._quadratic_forms(zf)
        pz = power[:n_beams] + power[n_beams:]  # ZF beams radiate from both ports
        if not pz.min() > 0:
            b = int(np.argmin(np.nan_to_num(pz, nan=-1.0)))
            raise BeamSynthesisError((b // N_POL, b % N_POL), ZeroVector("auxiliary pattern radiates no power"))
        # both auxiliary patterns carry unit radiated power before splicing
        scale = np.sqrt(pz)
        if self._in_map is None:
            # swap the ZF samples outside the sector for ISO ones
            W = zf - self._wl_out @ (self._s_out @ zf)
        else:
            W = self._in_map @ zf
        W3 = W.reshape(T, N_POL, n_beams)
        W3 /= scale
        for chi in range(N_POL):
            W3[:, chi, chi::N_POL] += iso
        W = W.reshape(N_POL * T, n_beams)
        Wf = W.view(np.float64)
        norm2 = np.einsum("ij,ij->j", Wf, Wf)
        norm2 = norm2[0::2] + norm2[1::2]
        if not (norm2.min() > 0 and norm2.max() < np.inf):
            b = int(np.flatnonzero(~(np.isfinite(norm2) & (norm2 > 0)))[0])
            raise BeamSynthesisError((b // N_POL, b % N_POL), ZeroVector("synthesized excitation is zero or undefined"))
        W *= np.sqrt((_default_omega(n_beams, omega) / n_beams) / norm2)
        return W

    def clear_cache(self):
        """Forget the cached ISO contribution."""
        self._iso_cache = (None, None)

    def _iso_correction(self, rx):
        """
        WL contribution of the out-of-sector ISO samples, one column per receiver.

        It depends on the array and receiver positions only, so the result
        for the last layout is kept and reused while the layout is unchanged.
        """
        key = (rx.shape, rx.tobytes())
        cached_key, cached = self._iso_cache
        if self.cache_layout and key == cached_key:
            return cached
        steer = _conj_phasors(steering_phases(self.geometry, rx).T)  # (T, R)
        steer /= np.sqrt(self._quadratic_forms(steer))
        value = self._wl_out @ (self._s_out @ steer)
        if self.cache_layout:
            self._iso_cache = (key, value)
        return value


def hcs_excitation_set(G, geometry, element, layout, sector, grid=None, omega=None):
    """One-shot HCS synthesis; see :class:`HcsSynthesizer` for repeated use."""
    positions = getattr(layout, "positions", layout)
    return HcsSynthesizer(geometry, element, sector, grid).synthesize(G, positions, omega)


def write_excitations_csv(W, path):
    """Write an excitation set as rows ``r, chi, t, psi, re, im``."""
    W = np.asarray(W, dtype=np.complex128)
    T, R = W.shape[0] // N_POL, W.shape[1] // N_POL
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["r", "chi", "t", "psi", "re", "im"])
        for r in range(R):
            for chi in range(N_POL):
                col = W[:, N_POL * r + chi]
                for t in range(T):
                    for psi in range(N_POL):
                        v = col[N_POL * t + psi]
                        out.writerow([r, chi, t, psi, repr(float(v.real)), repr(float(v.imag))])


def read_excitations_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    T = 1 + max(int(row["t"]) for row in rows)
    R = 1 + max(int(row["r"]) for row in rows)
    W = np.zeros((N_POL * T, N_POL * R), dtype=np.complex128)
    for row in rows:
        i = N_POL * int(row["t"]) + int(row["psi"])
        j = N_POL * int(row["r"]) + int(row["chi"])
        W[i, j] = complex(float(row["re"]), float(row["im"]))
    return W
