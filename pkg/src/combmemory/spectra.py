"""Homodyne noise spectra of the restored light and per-supermode squeezing transfer.

Spectra are normalized to shot noise (S = 1).  The local oscillator has the
step-comb profile of the driving field and the phase shifters are on.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .schmidt import ConsistencyError, SchmidtModes


@dataclass(frozen=True)
class NoiseSpectrum:
    omega: np.ndarray
    values: np.ndarray
    stage: str

    def __post_init__(self):
        om = np.asarray(self.omega, dtype=float)
        s = np.asarray(self.values, dtype=float)
        if om.shape != s.shape or om.ndim != 1:
            raise ValueError("omega and values must be 1-D arrays of equal length")
        if om.size > 1 and not np.all(np.diff(om) > 0):
            raise ValueError("omega grid must be strictly increasing")
        if self.stage not in ("input", "output"):
            raise ValueError("stage must be 'input' or 'output'")
        object.__setattr__(self, "omega", om)
        object.__setattr__(self, "values", s)

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["omega", "S"])
        for o, s in zip(self.omega, self.values):
            w.writerow([repr(float(o)), repr(float(s))])


def offset_sums(w: np.ndarray) -> np.ndarray:
    """c_d = sum_{m-k=d} W[m,k] for d = 0..N-1 (W symmetric)."""
    n = w.shape[0]
    return np.array([np.trace(w, offset=d) for d in range(n)])


def cosine_series(coeffs: np.ndarray, period: float, omega) -> np.ndarray:
    """sum_{m,k} cos((m-k) T omega) W[m,k] from its offset sums c_d."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    d = np.arange(len(coeffs))
    weights = np.where(d == 0, 1.0, 2.0) * coeffs
    return np.cos(np.outer(omega, d * period)) @ weights


def _retained(modes: SchmidtModes, retained):
    if retained is None:
        return modes
    if not 0 <= retained <= modes.count:
        raise IndexError(f"retained must be in [0, {modes.count}], got {retained}")
    return modes.truncated(retained)


def coupling_matrix(modes: SchmidtModes, src, retained: int | None = None) -> np.ndarray:
    """A_ij = T0 sum_{m,k} exp(-kappa T |k - m|) phi_i(t_m) phi_j(t_k)."""
    if src.n_pulses != modes.n_pulses:
        raise ConsistencyError(f"source has {src.n_pulses} pulses, modes expect {modes.n_pulses}")
    sel = _retained(modes, retained)
    e = src.correlation_matrix()
    phi = sel.modes
    a = modes.pulse_duration * phi @ e @ phi.T
    return 0.5 * (a + a.T)


def output_correlation(modes: SchmidtModes, src, retained: int | None = None) -> np.ndarray:
    """W[m,k] = T0 sum_ij s_i s_j A_ij phi_i(t_m) phi_j(t_k)."""
    sel = _retained(modes, retained)
    a = coupling_matrix(modes, src, retained)
    sp = sel.singular_values[:, None] * sel.modes
    w = modes.pulse_duration * sp.T @ a @ sp
    return 0.5 * (w + w.T)


def output_spectrum(modes: SchmidtModes, src, omega, retained: int | None = None) -> NoiseSpectrum:
    """S_out(omega) = 1 - (kappa T T0 / 2N) sum_{m,k} cos((m-k) T omega) sum_ij s_i s_j A_ij phi_i(t_m) phi_j(t_k)."""
    w = output_correlation(modes, src, retained)
    n = modes.n_pulses
    coeff = src.kappa_T / (2.0 * n)
    vals = 1.0 - coeff * cosine_series(offset_sums(w), src.period, omega)
    return NoiseSpectrum(np.atleast_1d(np.asarray(omega, dtype=float)), vals, "output")


def comb_dip_depths(spectrum: NoiseSpectrum, period: float, lines) -> np.ndarray:
    """1 - S at the comb frequencies 2 pi k / T (linear interpolation on the grid)."""
    om = 2.0 * math.pi * np.asarray(lines, dtype=float) / period
    return 1.0 - np.interp(om, spectrum.omega, spectrum.values)


# ---------------------------------------------------------------- supermodes


def overlap_matrix(modes: SchmidtModes, basis, retained: int | None = None) -> np.ndarray:
    """C_ik = sum_m T0 phi_i(t_m) L_k(t_m); orthonormal columns for a complete Schmidt set."""
    if basis.n_pulses != modes.n_pulses:
        raise ConsistencyError(f"basis has {basis.n_pulses} pulses, modes expect {modes.n_pulses}")
    sel = _retained(modes, retained)
    return modes.pulse_duration * sel.modes @ basis.functions.T


def squeezing_transfer(modes: SchmidtModes, basis, k: int, retained: int | None = None) -> float:
    """f_k = (sum_i s_i C_ik^2)^2: factor multiplying the normally ordered variance of supermode k."""
    if not 0 <= k < basis.count:
        raise IndexError(f"supermode index {k} out of range [0, {basis.count})")
    sel = _retained(modes, retained)
    c = overlap_matrix(modes, basis, retained)[:, k]
    return float(np.sum(sel.singular_values * c * c) ** 2)


def db_to_variance(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def variance_to_db(s):
    return 10.0 * np.log10(np.asarray(s, dtype=float))


def transfer_squeezing_db(input_db, transfer):
    """Output squeezing in dB for S_out = 1 + f (S_in - 1)."""
    s_in = db_to_variance(input_db)
    return variance_to_db(1.0 + np.asarray(transfer, dtype=float) * (s_in - 1.0))


@dataclass(frozen=True)
class SqueezingReport:
    input_db: tuple
    transfer: tuple
    output_db: tuple

    def rows(self):
        for k, (i, f, o) in enumerate(zip(self.input_db, self.transfer, self.output_db), start=1):
            yield k, i, f, o

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mode", "input_db", "transfer", "output_db"])
        for k, i, f, o in self.rows():
            w.writerow([k, repr(float(i)), repr(float(f)), repr(float(o))])

    def to_json(self) -> str:
        data = [
            {"mode": k, "input_db": float(i), "transfer": float(f), "output_db": float(o)}
            for k, i, f, o in self.rows()
        ]
        return json.dumps({"supermodes": data}, indent=2, sort_keys=True) + "\n"


def supermode_squeezing_report(modes: SchmidtModes, basis, input_db, retained: int | None = None) -> SqueezingReport:
    input_db = [float(v) for v in input_db]
    if len(input_db) != basis.count:
        raise ValueError(f"need {basis.count} input dB values, got {len(input_db)}")
    if any(v > 0 for v in input_db):
        raise ValueError("input squeezing values must be <= 0 dB")
    f = [squeezing_transfer(modes, basis, k, retained) for k in range(basis.count)]
    out = transfer_squeezing_db(input_db, f)
    return SqueezingReport(tuple(input_db), tuple(f), tuple(float(v) for v in out))
