"""Rectangular pulse-train profile of the driving/signal fields.

All times are dimensionless (scaled by the Raman rate Omega0^2/Delta).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

DEFAULT_VALIDITY_THRESHOLD = 100.0


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of an operation."""


@dataclass(frozen=True)
class PulseTrainProfile:
    n_pulses: int
    pulse_duration: float
    period: float

    def __post_init__(self):
        if int(self.n_pulses) != self.n_pulses or self.n_pulses < 1:
            raise ValueError(f"n_pulses must be an integer >= 1, got {self.n_pulses!r}")
        if not (self.pulse_duration > 0 and math.isfinite(self.pulse_duration)):
            raise ValueError(f"pulse_duration must be positive, got {self.pulse_duration!r}")
        if not (self.period >= self.pulse_duration and math.isfinite(self.period)):
            raise ValueError("period must be finite and >= pulse_duration")
        object.__setattr__(self, "n_pulses", int(self.n_pulses))

    @property
    def train_duration(self) -> float:
        """T_W = (N - 1) T + T0."""
        return (self.n_pulses - 1) * self.period + self.pulse_duration

    @property
    def duty_cycle(self) -> float:
        return self.pulse_duration / self.period

    def pulse_starts(self) -> np.ndarray:
        return np.arange(self.n_pulses) * self.period


@dataclass(frozen=True)
class PhysicalParams:
    """Dimensional estimates used only for the Raman-limit diagnostic."""

    detuning_ratio: float  # Delta / gamma
    dipole_scale: float  # d
    cell_wavelengths: float  # L / lambda

    def __post_init__(self):
        for name in ("detuning_ratio", "dipole_scale", "cell_wavelengths"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be strictly positive, got {v!r}")


def comb_profile(p: PulseTrainProfile, t):
    """F(t): 1 inside any pulse window [t_n, t_n + T0] (both ends closed), else 0.

    Accepts scalars or arrays.
    """
    t = np.asarray(t, dtype=float)
    n = np.clip(np.floor(t / p.period), 0, p.n_pulses - 1)
    local = t - n * p.period
    out = ((local >= 0.0) & (local <= p.pulse_duration)).astype(int)
    return int(out) if out.ndim == 0 else out


def integrated_profile(p: PulseTrainProfile, t):
    """Q(0, t) = int_0^t F, in closed form.

    Full pulses contribute T0 each; a partially elapsed pulse contributes
    its overlap with [0, t].
    """
    t_arr = np.asarray(t, dtype=float)
    tw = p.train_duration
    if np.any(~np.isfinite(t_arr)) or np.any(t_arr < 0) or np.any(t_arr > tw):
        raise DomainError(f"t must lie in [0, T_W={tw}]")
    n_full = np.minimum(np.floor(t_arr / p.period), p.n_pulses - 1)
    partial = np.minimum(t_arr - n_full * p.period, p.pulse_duration)
    q = n_full * p.pulse_duration + partial
    # T_W itself carries rounding; pin the total area
    q = np.where(t_arr >= tw, p.n_pulses * p.pulse_duration, q)
    return float(q) if q.ndim == 0 else q


def linearization_bound(p: PulseTrainProfile) -> float:
    """sup_t |Q(0,t) - (T0/T) t| for the sawtooth residual, equal to T0 (1 - T0/T)."""
    return p.pulse_duration * (1.0 - p.duty_cycle)


def raman_validity_ratio(phys: PhysicalParams, threshold: float = DEFAULT_VALIDITY_THRESHOLD):
    """Return (k_d / B, ok) where k_d/B = (Delta/gamma) (1/d) (L/lambda).

    ``ok`` is False when the ratio drops below ``threshold``; in that case the
    B-term of the field equation can no longer be dropped and a warning is
    emitted.
    """
    ratio = phys.detuning_ratio / phys.dipole_scale * phys.cell_wavelengths
    ok = ratio >= threshold
    if not ok:
        warnings.warn(
            f"k_d/B = {ratio:.3g} is below {threshold:g}; the B = 0 simplification is not justified",
            RuntimeWarning,
            stacklevel=2,
        )
    return ratio, ok
