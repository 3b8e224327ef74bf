"""Write/read kernels of the Raman memory and the full-cycle amplitude kernel.

Time ``t`` and depth ``z`` are dimensionless.  With B = 0 the writing and
(backward) readout kernels are sums over pulses of a unit phase times
J0(2 sqrt(z s)), where ``s`` is the driving area seen since (readout) or
until (writing) the relevant pulse.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .profiles import DomainError, PulseTrainProfile, comb_profile

SERIES_CROSSOVER = 4.0
ASYMPTOTIC_CROSSOVER = 20.0
CONVERGENCE_RTOL = 1e-8

_SERIES_COEFFS = np.array([(-1.0) ** k / math.factorial(k) ** 2 for k in range(40)])


class QuadratureError(RuntimeError):
    """Node doubling changed a quadrature result by more than the tolerance."""


@dataclass(frozen=True)
class MediumParams:
    length: float

    def __post_init__(self):
        if not (self.length > 0 and math.isfinite(self.length)):
            raise ValueError(f"medium length must be positive, got {self.length!r}")


ENVELOPE_RULES = ("pulse_average", "left")


@dataclass(frozen=True)
class MemoryConfig:
    profile: PulseTrainProfile
    medium: MediumParams
    phase_shifters: bool = True
    quadrature_nodes: int = 256
    envelope_rule: str = "pulse_average"
    pulse_nodes: int = 12

    def __post_init__(self):
        if int(self.quadrature_nodes) != self.quadrature_nodes or self.quadrature_nodes < 16:
            raise ValueError(f"quadrature_nodes must be an integer >= 16, got {self.quadrature_nodes!r}")
        if self.envelope_rule not in ENVELOPE_RULES:
            raise ValueError(f"envelope_rule must be one of {ENVELOPE_RULES}")
        if self.pulse_nodes < 1:
            raise ValueError("pulse_nodes must be >= 1")

    @property
    def length(self) -> float:
        return self.medium.length


# ---------------------------------------------------------------- Bessel J0


def _j0_series(x):
    y = 0.25 * x * x
    s = np.zeros_like(x)
    for c in _SERIES_COEFFS[::-1]:
        s = s * y + c
    return s


def _j0_miller(x, order=80):
    # backward recurrence J_{k-1} = (2k/x) J_k - J_{k+1}, normalised by J0 + 2 sum J_2k = 1
    j_next = np.zeros_like(x)
    j = np.full_like(x, 1e-30)
    norm = np.zeros_like(x)
    for k in range(order, 0, -1):
        j_prev = (2.0 * k / x) * j - j_next
        j_next, j = j, j_prev
        if k - 1 > 0 and (k - 1) % 2 == 0:
            norm += 2.0 * j
    return j / (j + norm)


def _j0_asymptotic(x, pairs=10):
    a = [1.0]
    for k in range(1, 2 * pairs + 1):
        a.append(a[-1] * (2 * k - 1) ** 2 / (8.0 * k))
    inv = 1.0 / x
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    for k in range(pairs):
        sign = -1.0 if k % 2 else 1.0
        p += sign * a[2 * k] * inv ** (2 * k)
        q -= sign * a[2 * k + 1] * inv ** (2 * k + 1)
    chi = x - 0.25 * math.pi
    return np.sqrt(2.0 / (math.pi * x)) * (p * np.cos(chi) - q * np.sin(chi))


def bessel_j0(x):
    """Bessel function of the first kind, order zero.

    Power series for |x| <= 4, Miller backward recurrence up to |x| = 20 and
    the Hankel asymptotic expansion beyond.  Absolute error below 1e-15 on
    |x| <= 500.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("bessel_j0 requires finite arguments")
    ax = np.abs(arr)
    out = np.empty_like(ax)
    small = ax <= SERIES_CROSSOVER
    large = ax >= ASYMPTOTIC_CROSSOVER
    mid = ~(small | large)
    if small.any():
        out[small] = _j0_series(ax[small])
    if mid.any():
        out[mid] = _j0_miller(ax[mid])
    if large.any():
        out[large] = _j0_asymptotic(ax[large])
    return float(out) if out.ndim == 0 else out


def _j0_sqrt(arg):
    """J0(2 sqrt(arg)), clamping tiny negative round-off in ``arg`` to zero."""
    return bessel_j0(2.0 * np.sqrt(np.maximum(arg, 0.0)))


# ---------------------------------------------------------------- quadrature


@lru_cache(maxsize=64)
def _leggauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(n: int, a: float, b: float):
    """Nodes and weights of the n-point Gauss-Legendre rule on [a, b]."""
    x, w = _leggauss(int(n))
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def depth_nodes(cfg: MemoryConfig, nodes: int | None = None):
    return gauss_legendre(nodes or cfg.quadrature_nodes, 0.0, cfg.length)


# ---------------------------------------------------------------- kernels


def _check_tz(cfg: MemoryConfig, t, z):
    t = np.asarray(t, dtype=float)
    z = np.asarray(z, dtype=float)
    tw = cfg.profile.train_duration
    if np.any(~np.isfinite(t)) or np.any(t < 0) or np.any(t > tw):
        raise DomainError(f"t must lie in [0, T_W={tw}]")
    if np.any(~np.isfinite(z)) or np.any(z < 0) or np.any(z > cfg.length):
        raise DomainError(f"z must lie in [0, L={cfg.length}]")
    return np.broadcast_arrays(t, z)


def _active_windows(p: PulseTrainProfile, t):
    """Yield (mask, n0, local) for the pulse windows containing t.

    ``n0`` is the zero-based pulse index, ``local = t - t_n``.  Two windows
    can share an endpoint only when T0 == T.
    """
    n = np.clip(np.floor(t / p.period), 0, p.n_pulses - 1)
    shifts = (0, 1) if p.pulse_duration >= p.period else (0,)
    for shift in shifts:
        k = n - shift
        local = t - k * p.period
        mask = (k >= 0) & (local >= 0.0) & (local <= p.pulse_duration)
        yield mask, k, local


def write_kernel(cfg: MemoryConfig, t, z):
    """G_ab(t, z): response of the coherence at depth z to input at time t.

    The sum over pulses n carries exp(-i s) J0(2 sqrt(z s)) with
    s = (N - n + 1) T0 + t_n - t, the driving area still to come.
    """
    t, z = _check_tz(cfg, t, z)
    p = cfg.profile
    out = np.zeros(t.shape, dtype=complex)
    for mask, k, local in _active_windows(p, t):
        if not mask.any():
            continue
        s = (p.n_pulses - k[mask]) * p.pulse_duration - local[mask]
        out[mask] += np.exp(-1j * s) * _j0_sqrt(z[mask] * s)
    return out[()] if out.ndim == 0 else out


def read_kernel(cfg: MemoryConfig, t, z):
    """G_ba(t, z): readout kernel, s = (n - 1) T0 + t - t_n is the area elapsed."""
    t, z = _check_tz(cfg, t, z)
    p = cfg.profile
    out = np.zeros(t.shape, dtype=complex)
    for mask, k, local in _active_windows(p, t):
        if not mask.any():
            continue
        s = k[mask] * p.pulse_duration + local[mask]
        out[mask] += np.exp(-1j * s) * _j0_sqrt(z[mask] * s)
    return out[()] if out.ndim == 0 else out


def _amplitude(cfg: MemoryConfig, t, tp, nodes: int):
    p = cfg.profile
    zn, wn = depth_nodes(cfg, nodes)
    ratio = p.duty_cycle
    jt = _j0_sqrt(ratio * t[..., None] * zn)
    jtp = _j0_sqrt(ratio * tp[..., None] * zn)
    gate = comb_profile(p, t) * comb_profile(p, tp)
    return gate * np.sum(jt * jtp * wn, axis=-1)


def amplitude_kernel(cfg: MemoryConfig, t, tp):
    """G(t, t') = F(t) F(t') int_0^L J0(2 sqrt(r z t)) J0(2 sqrt(r z t')) dz, r = T0/T.

    Gauss-Legendre in z with ``cfg.quadrature_nodes`` nodes; the result is
    recomputed with twice the nodes and a change above 1e-8 (relative to the
    kernel bound L) raises QuadratureError.
    """
    tw = cfg.profile.train_duration
    t, tp = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(tp, dtype=float))
    for arr in (t, tp):
        if np.any(~np.isfinite(arr)) or np.any(arr < 0) or np.any(arr > tw):
            raise DomainError(f"times must lie in [0, T_W={tw}]")
    g = _amplitude(cfg, t, tp, cfg.quadrature_nodes)
    g2 = _amplitude(cfg, t, tp, 2 * cfg.quadrature_nodes)
    err = float(np.max(np.abs(g - g2), initial=0.0)) / cfg.length
    if err > CONVERGENCE_RTOL:
        raise QuadratureError(f"z-quadrature not converged: node doubling changed G by {err:.2e} (relative)")
    return float(g) if g.ndim == 0 else g


def full_kernel(cfg: MemoryConfig, t, tp):
    """K(t, t') = exp(-i (T0/T)(t + t')) G(t, t'); complex symmetric."""
    g = amplitude_kernel(cfg, t, tp)
    phase = np.exp(-1j * cfg.profile.duty_cycle * (np.asarray(t, dtype=float) + np.asarray(tp, dtype=float)))
    out = phase * g
    return out[()] if np.ndim(out) == 0 else out
