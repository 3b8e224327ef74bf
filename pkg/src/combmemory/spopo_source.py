"""Input light from a synchronously pumped OPO below threshold.

Pulses are correlated through the cavity memory: the normally ordered
Y-quadrature correlator between pulses n and n' decays as
exp(-kappa T |n - n'|).  Intra-pulse correlations are neglected.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import hermite
from scipy.linalg import toeplitz
from scipy.optimize import minimize_scalar

from .profiles import PulseTrainProfile
from .schmidt import EigensolverError
from .spectra import NoiseSpectrum, cosine_series


@dataclass(frozen=True)
class SpopoSource:
    kappa_T: float
    profile: PulseTrainProfile

    def __post_init__(self):
        if not (self.kappa_T > 0 and math.isfinite(self.kappa_T)):
            raise ValueError(f"kappa_T must be positive and finite, got {self.kappa_T!r}")

    @property
    def n_pulses(self) -> int:
        return self.profile.n_pulses

    @property
    def period(self) -> float:
        return self.profile.period

    @property
    def pulse_duration(self) -> float:
        return self.profile.pulse_duration

    def correlation_matrix(self) -> np.ndarray:
        """E[m, k] = exp(-kappa T |m - k|)."""
        return toeplitz(np.exp(-self.kappa_T * np.arange(self.n_pulses)))


def input_pulse_correlator(src: SpopoSource, n: int, n_prime: int) -> float:
    """<:Y Y:> coefficient -(kappa T / 8N) exp(-kappa T |n - n'|); indices are 1-based."""
    nn = src.n_pulses
    for idx in (n, n_prime):
        if int(idx) != idx or not 1 <= idx <= nn:
            raise IndexError(f"pulse index {idx} outside [1, {nn}]")
    return -src.kappa_T / (8.0 * nn) * math.exp(-src.kappa_T * abs(n - n_prime))


def input_offset_sums(src: SpopoSource) -> np.ndarray:
    """(N - d) exp(-kappa T d) for d = 0..N-1."""
    n = src.n_pulses
    d = np.arange(n)
    return (n - d) * np.exp(-src.kappa_T * d)


def input_spectrum(src: SpopoSource, omega) -> NoiseSpectrum:
    """S_in(omega) = 1 - (kappa T / 2N) sum_{m,k} cos((m-k) T omega) exp(-kappa T |m-k|)."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    if not np.all(np.isfinite(omega)):
        raise ValueError("omega grid must be finite")
    coeff = src.kappa_T / (2.0 * src.n_pulses)
    vals = 1.0 - coeff * cosine_series(input_offset_sums(src), src.period, omega)
    return NoiseSpectrum(omega, vals, "input")


# ---------------------------------------------------------------- supermodes


@dataclass(frozen=True)
class SupermodeBasis:
    """Functions L_k on the pulse grid, ``functions[k, m]``, orthonormal under weight T0."""

    kind: str
    functions: np.ndarray
    pulse_duration: float
    width: float | None = None
    center: float | None = None
    eigenvalues: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("hermite", "empirical"):
            raise ValueError(f"unknown supermode kind {self.kind!r}")

    @property
    def count(self) -> int:
        return self.functions.shape[0]

    @property
    def n_pulses(self) -> int:
        return self.functions.shape[1]

    def gram(self) -> np.ndarray:
        return self.pulse_duration * self.functions @ self.functions.T


def _modified_gram_schmidt(rows: np.ndarray) -> np.ndarray:
    out = np.array(rows, dtype=float)
    for k in range(out.shape[0]):
        for j in range(k):
            out[k] -= np.dot(out[j], out[k]) * out[j]
        nrm = np.linalg.norm(out[k])
        if nrm == 0:
            raise ValueError(f"supermode {k} is linearly dependent on the previous ones")
        out[k] /= nrm
    return out


def hermite_supermodes(p: PulseTrainProfile, width: float, count: int) -> SupermodeBasis:
    """Hermite-Gauss functions of the pulse index, centred at (N+1)/2, width in pulse counts."""
    if not (width > 0 and math.isfinite(width)):
        raise ValueError(f"width must be positive, got {width!r}")
    if not 1 <= count <= p.n_pulses:
        raise ValueError(f"count must be in [1, N={p.n_pulses}], got {count}")
    center = 0.5 * (p.n_pulses + 1)
    x = (np.arange(1, p.n_pulses + 1) - center) / width
    gauss = np.exp(-0.5 * x * x)
    raw = np.array([hermite.hermval(x, np.eye(count)[k]) * gauss for k in range(count)])
    funcs = _modified_gram_schmidt(raw) / math.sqrt(p.pulse_duration)
    return SupermodeBasis("hermite", funcs, p.pulse_duration, width=float(width), center=center)


def empirical_supermodes(src: SpopoSource, count: int) -> SupermodeBasis:
    """Leading eigenvectors of the pulse correlation matrix exp(-kappa T |m - k|)."""
    n = src.n_pulses
    if not 1 <= count <= n:
        raise ValueError(f"count must be in [1, N={n}], got {count}")
    try:
        vals, vecs = np.linalg.eigh(src.correlation_matrix())
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(str(exc)) from exc
    order = np.argsort(-vals, kind="stable")[:count]
    vecs = vecs[:, order].T.copy()
    for row in vecs:
        if row[0] < 0:
            row *= -1.0
    funcs = vecs / math.sqrt(src.pulse_duration)
    return SupermodeBasis("empirical", funcs, src.pulse_duration, eigenvalues=vals[order])


def default_hermite_width(src: SpopoSource) -> float:
    """Width maximising the overlap of the Gaussian supermode with the leading empirical one."""
    p = src.profile
    if p.n_pulses == 1:
        return 1.0
    lead = empirical_supermodes(src, 1).functions[0]

    def neg_overlap(width):
        g = hermite_supermodes(p, width, 1).functions[0]
        return -abs(p.pulse_duration * float(np.dot(g, lead)))

    res = minimize_scalar(neg_overlap, bounds=(0.5, 4.0 * p.n_pulses), method="bounded", options={"xatol": 1e-6})
    return float(res.x)


def basis_overlap(a: SupermodeBasis, b: SupermodeBasis) -> np.ndarray:
    """O[k, j] = sum_m T0 a_k(t_m) b_j(t_m)."""
    if a.n_pulses != b.n_pulses:
        raise ValueError("bases live on different pulse grids")
    return a.pulse_duration * a.functions @ b.functions.T
