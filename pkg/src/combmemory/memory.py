"""Full write-store-read cycle on the envelope scale and writing efficiency."""
from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .kernels import MediumParams, MemoryConfig
from .profiles import PulseTrainProfile
from .schmidt import ConsistencyError, SchmidtModes, build_envelope_matrix, schmidt_decompose

EFFICIENCY_CLIP = 1.02
# N T0 must stay below the medium transit time, which holds for N < 1000
VALIDITY_MAX_PULSES = 1000


@dataclass(frozen=True)
class EnvelopeField:
    """Complex envelope amplitudes, one per pulse or (N, n_sub) intra-pulse samples.

    The amplitude convention is a = X + iY.
    """

    amplitudes: np.ndarray
    pulse_duration: float

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.ndim not in (1, 2) or a.shape[0] < 1:
            raise ValueError("amplitudes must have shape (N,) or (N, n_sub)")
        object.__setattr__(self, "amplitudes", a)

    @classmethod
    def from_quadratures(cls, x, y, pulse_duration: float) -> "EnvelopeField":
        return cls(np.asarray(x, dtype=float) + 1j * np.asarray(y, dtype=float), pulse_duration)

    @property
    def n_pulses(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def envelope(self) -> np.ndarray:
        a = self.amplitudes
        return a if a.ndim == 1 else a.mean(axis=1)

    @property
    def x(self) -> np.ndarray:
        return self.envelope.real

    @property
    def y(self) -> np.ndarray:
        return self.envelope.imag

    def norm(self) -> float:
        """sqrt(sum_m T0 |a_m|^2) on the envelope grid."""
        return math.sqrt(self.pulse_duration * float(np.sum(np.abs(self.envelope) ** 2)))


@dataclass(frozen=True)
class EfficiencyRow:
    n_pulses: int
    length: float
    shifters: bool
    efficiency: float
    clipped: bool = False

    @property
    def outside_validity(self) -> bool:
        return self.n_pulses >= VALIDITY_MAX_PULSES


@dataclass(frozen=True)
class EfficiencyScan:
    rows: tuple

    def curve(self, length: float, shifters: bool):
        sel = [r for r in self.rows if r.length == length and r.shifters == shifters]
        sel.sort(key=lambda r: r.n_pulses)
        return np.array([r.n_pulses for r in sel]), np.array([r.efficiency for r in sel])

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["N", "L", "shifters", "efficiency", "outside_validity"])
        for r in self.rows:
            w.writerow([r.n_pulses, repr(float(r.length)), int(r.shifters), repr(float(r.efficiency)), int(r.outside_validity)])


def _check_profile(modes: SchmidtModes, p: PulseTrainProfile):
    if modes.n_pulses != p.n_pulses or not math.isclose(modes.pulse_duration, p.pulse_duration, rel_tol=1e-12):
        raise ConsistencyError(
            f"modes were built for N={modes.n_pulses}, T0={modes.pulse_duration}; "
            f"profile has N={p.n_pulses}, T0={p.pulse_duration}"
        )


def raw_writing_efficiency(modes: SchmidtModes, p: PulseTrainProfile, shifters: bool) -> float:
    """E = (1/(T0 N)) sum_i s_i |sum_m T0 phi_i(t_m) exp(i m T0 [no shifters])|^2, unclipped."""
    _check_profile(modes, p)
    t0 = p.pulse_duration
    m = np.arange(p.n_pulses)
    phase = np.ones(p.n_pulses) if shifters else np.exp(1j * m * t0)
    proj = (modes.modes * t0) @ phase
    return float(np.sum(modes.singular_values * np.abs(proj) ** 2) / (t0 * p.n_pulses))


def writing_efficiency(modes: SchmidtModes, p: PulseTrainProfile, shifters: bool) -> float:
    """Writing efficiency (stored spin excitations / input photons) for a flat input train.

    Values above 1.02 can only come from envelope-discretization error; they
    are reported clipped to 1 with a RuntimeWarning.
    """
    eff = raw_writing_efficiency(modes, p, shifters)
    if eff > EFFICIENCY_CLIP:
        warnings.warn(f"efficiency {eff:.4f} exceeds {EFFICIENCY_CLIP}; clipped to 1", RuntimeWarning, stacklevel=2)
        return 1.0
    return eff


def efficiency_scan(
    lengths: Sequence[float],
    n_values: Iterable[int],
    pulse_duration: float,
    period: float,
    shifters=(False, True),
    quadrature_nodes: int = 256,
    envelope_rule: str = "pulse_average",
    workers: int = 1,
) -> EfficiencyScan:
    """Efficiency versus pulse count for each medium length.

    ``shifters`` is a bool or a sequence of bools.  Matrix entries do not
    depend on N, so one matrix per length is built at the largest N and the
    leading blocks are decomposed.
    """
    lengths = list(lengths)
    n_values = sorted({int(n) for n in n_values})
    flags = [bool(shifters)] if isinstance(shifters, (bool, np.bool_)) else [bool(s) for s in shifters]
    if not lengths:
        raise ValueError("lengths must not be empty")
    if not n_values:
        raise ValueError("n_values must not be empty")
    if not flags:
        raise ValueError("shifters must not be empty")
    if n_values[0] < 1:
        raise ValueError("pulse counts must be >= 1")

    rows = []
    for length in lengths:
        top = PulseTrainProfile(n_values[-1], pulse_duration, period)
        cfg = MemoryConfig(top, MediumParams(length), quadrature_nodes=quadrature_nodes, envelope_rule=envelope_rule)
        full = build_envelope_matrix(cfg)

        def point(n, full=full, length=length):
            p = PulseTrainProfile(n, pulse_duration, period)
            sub = type(full)(full.matrix[:n, :n].copy(), p, length, full.rule, full.quadrature_nodes, full.convergence)
            modes = schmidt_decompose(sub)
            out = []
            for flag in flags:
                raw = raw_writing_efficiency(modes, p, flag)
                clipped = raw > EFFICIENCY_CLIP
                out.append(EfficiencyRow(n, float(length), flag, 1.0 if clipped else raw, clipped))
            return out

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(point, n_values))
        else:
            results = [point(n) for n in n_values]
        for res in results:
            rows.extend(res)
    return EfficiencyScan(tuple(rows))


def transfer_matrix(modes: SchmidtModes, shifters: bool) -> np.ndarray:
    """Matrix R with a_out = R a_in on the envelope grid.

    With shifters R = -G J, where G = T0 G(t_m, t_k) is rebuilt from the
    retained Schmidt modes and J reverses the pulse order (the input enters
    as a_in(T_W - t')).  Without shifters the kernel keeps the phase
    exp(-i (m + k) T0).
    """
    g = modes.envelope_operator()
    if not shifters:
        ph = np.exp(-1j * np.arange(modes.n_pulses) * modes.pulse_duration)
        g = ph[:, None] * g * ph[None, :]
    return -g[:, ::-1]


def full_cycle_transform(field: EnvelopeField, modes: SchmidtModes, shifters: bool) -> EnvelopeField:
    """Restored envelope a_out(t_m) = -sum_k T0 K(t_m, t_k) a_in(T_W - t_k).

    With ideal phase shifters K is the real kernel G and the X and Y
    quadratures evolve independently; without them K carries
    exp(-i (T0/T)(t + t')) and mixes the quadratures.
    """
    a = field.envelope
    if len(a) != modes.n_pulses:
        raise ConsistencyError(f"field has {len(a)} pulses, modes expect {modes.n_pulses}")
    r = transfer_matrix(modes, shifters)
    return EnvelopeField(r @ a, field.pulse_duration)
