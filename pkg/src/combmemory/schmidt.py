"""Pulse-grid discretization of the full-cycle kernel and its Schmidt modes.

On the envelope scale each pulse is one sample.  Two sampling rules are
available for the z-profile that pulse m imprints on the medium:

``pulse_average`` (default)
    P_m(z) = (1/T0) int_{pulse m} J0(2 sqrt(z Q(0,t))) dt, the average of the
    exact (piecewise-linear Q) kernel over the pulse window.  This is the
    exact Galerkin projection of the memory onto pulse-wise constant
    envelopes, so its singular values never exceed one.
``left``
    P_m(z) = J0(2 sqrt(z m T0)), the linearized kernel G(t, t') sampled at
    the pulse start times t_m = m T.

In both cases M[m, k] = T0 int_0^L P_m(z) P_k(z) dz.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import CONVERGENCE_RTOL, MemoryConfig, QuadratureError, _j0_sqrt, depth_nodes, gauss_legendre
from .profiles import PulseTrainProfile

NEGATIVE_EIGENVALUE_LIMIT = -1e-6


class ConsistencyError(ValueError):
    """Inputs that were built from incompatible configurations."""


class EigensolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class EnvelopeMatrix:
    matrix: np.ndarray
    profile: PulseTrainProfile
    length: float
    rule: str
    quadrature_nodes: int
    convergence: float = 0.0

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class SchmidtModes:
    """Singular values s_i (descending) and mode samples phi_i(t_m).

    ``modes[i, m]`` is phi_i at the m-th pulse; the modes are orthonormal under
    sum_m phi_i phi_j T0.
    """

    singular_values: np.ndarray
    modes: np.ndarray
    profile: PulseTrainProfile
    clip_magnitude: float = 0.0
    length: float = field(default=float("nan"))

    @property
    def count(self) -> int:
        return len(self.singular_values)

    @property
    def n_pulses(self) -> int:
        return self.profile.n_pulses

    @property
    def pulse_duration(self) -> float:
        return self.profile.pulse_duration

    @property
    def vectors(self) -> np.ndarray:
        """Mode samples scaled to unit Euclidean norm (rows)."""
        return self.modes * math.sqrt(self.pulse_duration)

    @property
    def envelope_modes(self) -> np.ndarray:
        return math.sqrt(self.profile.period / self.pulse_duration) * self.modes

    def truncated(self, retained: int) -> "SchmidtModes":
        if not 0 <= retained <= self.count:
            raise IndexError(f"retained must be in [0, {self.count}], got {retained}")
        return SchmidtModes(
            self.singular_values[:retained],
            self.modes[:retained],
            self.profile,
            self.clip_magnitude,
            self.length,
        )

    def envelope_operator(self) -> np.ndarray:
        """sum_i s_i u_i u_i^T, i.e. T0 G(t_m, t_k) rebuilt from the retained modes."""
        u = self.vectors
        return (u.T * self.singular_values) @ u


def pulse_profiles(cfg: MemoryConfig, z: np.ndarray, n_pulses: int | None = None, pulse_nodes: int | None = None):
    """z-profiles P_m(z), shape (N, len(z)), for the configured envelope rule."""
    p = cfg.profile
    n = p.n_pulses if n_pulses is None else n_pulses
    t0 = p.pulse_duration
    starts = np.arange(n) * t0
    if cfg.envelope_rule == "left":
        return _j0_sqrt(np.outer(starts, z))
    s, w = gauss_legendre(pulse_nodes or cfg.pulse_nodes, 0.0, t0)
    w = w / t0
    area = starts[:, None] + s[None, :]
    prof = np.zeros((n, len(z)))
    for j in range(len(s)):
        prof += w[j] * _j0_sqrt(np.outer(area[:, j], z))
    return prof


def _gram(cfg: MemoryConfig, nodes: int, pulse_nodes: int, n_pulses: int) -> np.ndarray:
    z, w = depth_nodes(cfg, nodes)
    prof = pulse_profiles(cfg, z, n_pulses, pulse_nodes)
    m = cfg.profile.pulse_duration * (prof * w) @ prof.T
    return 0.5 * (m + m.T)


def build_envelope_matrix(cfg: MemoryConfig, n_pulses: int | None = None) -> EnvelopeMatrix:
    """Envelope matrix of the full-cycle amplitude kernel on the pulse grid.

    ``n_pulses`` overrides the profile's pulse count (entries do not depend on
    N, so a scan can build the largest matrix once and slice it).
    """
    n = cfg.profile.n_pulses if n_pulses is None else int(n_pulses)
    m = _gram(cfg, cfg.quadrature_nodes, cfg.pulse_nodes, n)
    m2 = _gram(cfg, 2 * cfg.quadrature_nodes, 2 * cfg.pulse_nodes, n)
    scale = float(np.max(np.abs(m2)))
    rel = float(np.max(np.abs(m - m2))) / scale if scale > 0 else 0.0
    if not rel <= CONVERGENCE_RTOL:
        raise QuadratureError(f"envelope matrix not converged: node doubling changed entries by {rel:.2e}")
    profile = cfg.profile
    if n != profile.n_pulses:
        profile = PulseTrainProfile(n, profile.pulse_duration, profile.period)
    return EnvelopeMatrix(m, profile, cfg.length, cfg.envelope_rule, cfg.quadrature_nodes, rel)


def schmidt_decompose(env: EnvelopeMatrix) -> SchmidtModes:
    m = env.matrix
    if not np.allclose(m, m.T, rtol=0, atol=1e-12 * max(1.0, float(np.max(np.abs(m))))):
        raise ConsistencyError("envelope matrix is not symmetric")
    try:
        vals, vecs = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(str(exc)) from exc
    if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(vecs))):
        raise EigensolverError("eigensolver returned non-finite values")
    if vals.min() < NEGATIVE_EIGENVALUE_LIMIT:
        raise ConsistencyError(f"envelope matrix has eigenvalue {vals.min():.3e} below {NEGATIVE_EIGENVALUE_LIMIT}")
    clip = float(max(0.0, -vals.min()))
    order = np.argsort(-vals, kind="stable")
    vals = np.clip(vals[order], 0.0, None)
    vecs = vecs[:, order].T.copy()
    for row in vecs:
        nz = np.flatnonzero(np.abs(row) > 1e-12 * np.abs(row).max())
        if nz.size and row[nz[0]] < 0:
            row *= -1.0
    modes = vecs / math.sqrt(env.profile.pulse_duration)
    return SchmidtModes(vals, modes, env.profile, clip, env.length)


def memory_modes(cfg: MemoryConfig) -> SchmidtModes:
    """Convenience: build the envelope matrix for ``cfg`` and decompose it."""
    return schmidt_decompose(build_envelope_matrix(cfg))


def mode_zero_frequency(modes: SchmidtModes, i: int, with_phase: bool = False) -> complex:
    """phi_i(omega = 0) = T_W^{-1/2} sum_m T0 phi_i(t_m) exp(i m T0).

    ``with_phase=False`` drops the exp(i m T0) factor, as after ideal phase
    shifters.
    """
    if not 0 <= i < modes.count:
        raise IndexError(f"mode index {i} out of range")
    t0 = modes.pulse_duration
    m = np.arange(modes.n_pulses)
    phase = np.exp(1j * m * t0) if with_phase else np.ones(modes.n_pulses)
    return complex(np.sum(t0 * modes.modes[i] * phase) / math.sqrt(modes.profile.train_duration))
