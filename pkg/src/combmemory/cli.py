"""Command-line front end: eigen | efficiency | spectrum | squeezing | verify.

Configuration is a single JSON document; command-line flags override its
keys.  All results are computed before anything is written, and files are
replaced atomically, so a failed run leaves no partial output.

Exit codes: 0 success, 1 a verification check failed, 2 usage or
configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .kernels import MediumParams, MemoryConfig, QuadratureError, read_kernel, write_kernel
from .memory import EnvelopeField, efficiency_scan, transfer_matrix
from .oracle import SolverGrid, integrate_write, kernel_equivalence_report
from .profiles import PulseTrainProfile
from .schmidt import build_envelope_matrix, mode_zero_frequency, schmidt_decompose
from .spectra import NoiseSpectrum, cosine_series, offset_sums, output_correlation, output_spectrum, supermode_squeezing_report
from .spopo_source import SpopoSource, default_hermite_width, empirical_supermodes, hermite_supermodes, input_spectrum

EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    n_pulses: int = 90
    pulse_duration: float = 0.1
    period: float = 1.0e4
    length: float = 10.0
    kappa_T: float = 0.1
    quadrature_nodes: int = 256
    envelope_rule: str = "pulse_average"
    phase_shifters: bool = True
    efficiency_shifters: object = "both"
    basis: str = "hermite"
    hermite_width: float | None = None
    supermodes: int = 6
    retained: int = 6
    input_db: list | None = None
    omega_points: int = 2000
    omega_lines: float = 2.5
    n_range: str = "1:600:1"
    lengths: list = (10.0,)
    workers: int = 1
    seed: int = 0
    out: str = "out"

    def validate(self) -> "RunConfig":
        def positive(name, integer=False, allow_zero=False):
            v = getattr(self, name)
            kind = int if integer else (int, float)
            if isinstance(v, bool) or not isinstance(v, kind) or not math.isfinite(v):
                raise ConfigError(f"{name} must be a {'integer' if integer else 'number'}, got {v!r}")
            if v < 0 or (v == 0 and not allow_zero):
                raise ConfigError(f"{name} must be {'>= 0' if allow_zero else '> 0'}, got {v!r}")

        for name in ("n_pulses", "quadrature_nodes", "supermodes", "omega_points", "workers"):
            positive(name, integer=True)
        positive("retained", integer=True, allow_zero=True)
        positive("seed", integer=True, allow_zero=True)
        for name in ("pulse_duration", "period", "length", "omega_lines"):
            positive(name)
        positive("kappa_T", allow_zero=True)
        if self.period < self.pulse_duration:
            raise ConfigError("period must be >= pulse_duration")
        if self.envelope_rule not in ("pulse_average", "left"):
            raise ConfigError(f"envelope_rule must be 'pulse_average' or 'left', got {self.envelope_rule!r}")
        if not isinstance(self.phase_shifters, bool):
            raise ConfigError("phase_shifters must be true or false")
        if self.efficiency_shifters not in ("both", True, False):
            raise ConfigError("efficiency_shifters must be 'both', true or false")
        if self.basis not in ("hermite", "empirical"):
            raise ConfigError(f"basis must be 'hermite' or 'empirical', got {self.basis!r}")
        if self.hermite_width is not None:
            positive("hermite_width")
        if self.supermodes > self.n_pulses:
            raise ConfigError("supermodes must not exceed n_pulses")
        if self.input_db is not None:
            if not isinstance(self.input_db, (list, tuple)) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) for v in self.input_db
            ):
                raise ConfigError("input_db must be a list of numbers")
            self.input_db = [float(v) for v in self.input_db]
            if any(v > 0 for v in self.input_db):
                raise ConfigError("input_db values must be <= 0")
        parse_n_range(self.n_range)
        if isinstance(self.lengths, (str, bytes)) or not isinstance(self.lengths, (list, tuple)):
            raise ConfigError("lengths must be a list of numbers")
        self.lengths = [float(v) for v in self.lengths]
        if not self.lengths or any(not (v > 0 and math.isfinite(v)) for v in self.lengths):
            raise ConfigError("lengths must be a non-empty list of positive numbers")
        if not isinstance(self.out, str) or not self.out:
            raise ConfigError("out must be a directory path")
        return self

    # -------------------------------------------------------------- builders

    def profile(self) -> PulseTrainProfile:
        return PulseTrainProfile(self.n_pulses, self.pulse_duration, self.period)

    def memory(self) -> MemoryConfig:
        return MemoryConfig(
            self.profile(),
            MediumParams(self.length),
            phase_shifters=self.phase_shifters,
            quadrature_nodes=self.quadrature_nodes,
            envelope_rule=self.envelope_rule,
        )

    def omega_grid(self) -> np.ndarray:
        half = 2.0 * math.pi * self.omega_lines / self.period
        return np.linspace(-half, half, self.omega_points)

    def summary(self) -> dict:
        d = asdict(self)
        d.pop("out")
        d["lengths"] = list(d["lengths"])
        return d


def parse_n_range(text: str):
    """'A:B:STEP' -> range(A, B + 1, STEP), inclusive of B."""
    try:
        parts = [int(v) for v in str(text).split(":")]
    except ValueError:
        raise ConfigError(f"n_range must look like A:B:STEP, got {text!r}") from None
    if len(parts) == 2:
        parts.append(1)
    if len(parts) != 3:
        raise ConfigError(f"n_range must look like A:B:STEP, got {text!r}")
    a, b, step = parts
    if a < 1 or step < 1:
        raise ConfigError("n_range needs A >= 1 and STEP >= 1")
    values = list(range(a, b + 1, step))
    if not values:
        raise ConfigError(f"n_range {text!r} is empty")
    return values


def parse_bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def parse_float_list(text: str, name: str):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"{name} must be a comma-separated list of numbers") from None


def load_config(path: str | None, overrides: dict) -> RunConfig:
    data = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed config JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**data).validate()


# ---------------------------------------------------------------- output


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _num(v) -> str:
    return repr(float(v))


def write_outputs(out_dir: str, files: dict) -> None:
    """Write every file atomically (temp file in the target directory, then rename)."""
    target = Path(out_dir)
    target.mkdir(parents=True, exist_ok=True)
    for name in sorted(files):
        fd, tmp = tempfile.mkstemp(dir=target, prefix=f".{name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(files[name])
            os.replace(tmp, target / name)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


def _gnuplot(csv_name: str, title: str, xlabel: str, ylabel: str, plot: str) -> str:
    return (
        "set datafile separator ','\n"
        "set key autotitle columnhead\n"
        f"set title '{title}'\n"
        f"set xlabel '{xlabel}'\n"
        f"set ylabel '{ylabel}'\n"
        f"plot {plot.format(csv=csv_name)}\n"
    )


# ---------------------------------------------------------------- commands


def cmd_eigen(cfg: RunConfig) -> dict:
    modes = schmidt_decompose(build_envelope_matrix(cfg.memory()))
    n = modes.n_pulses
    header = ["mode", "s", "phi0_shifted_re", "phi0_shifted_im", "phi0_phase_re", "phi0_phase_im"]
    header += [f"phi_t{m + 1}" for m in range(n)]
    rows = []
    for i in range(modes.count):
        w0 = mode_zero_frequency(modes, i, with_phase=False)
        w1 = mode_zero_frequency(modes, i, with_phase=True)
        row = [i + 1, _num(modes.singular_values[i]), _num(w0.real), _num(w0.imag), _num(w1.real), _num(w1.imag)]
        rows.append(row + [_num(v) for v in modes.modes[i]])
    gp = _gnuplot("modes.csv", "Schmidt singular values", "mode index", "s_i (dimensionless)",
                  "'{csv}' using 1:2 with linespoints")
    return {"modes.csv": _csv_text(header, rows), "modes.gp": gp}


def cmd_efficiency(cfg: RunConfig) -> dict:
    flags = (False, True) if cfg.efficiency_shifters == "both" else bool(cfg.efficiency_shifters)
    scan = efficiency_scan(
        cfg.lengths,
        parse_n_range(cfg.n_range),
        cfg.pulse_duration,
        cfg.period,
        shifters=flags,
        quadrature_nodes=cfg.quadrature_nodes,
        envelope_rule=cfg.envelope_rule,
        workers=cfg.workers,
    )
    buf = io.StringIO()
    scan.write_csv(buf)
    gp = _gnuplot("efficiency.csv", "Writing efficiency", "N (pulses)", "efficiency (dimensionless)",
                  "'{csv}' using 1:4 with points")
    return {"efficiency.csv": buf.getvalue(), "efficiency.gp": gp}


def _spectrum(cfg: RunConfig, stage: str) -> NoiseSpectrum:
    omega = cfg.omega_grid()
    tag = "input" if stage == "in" else "output"
    if stage == "out" and not cfg.phase_shifters:
        raise ConfigError("the output spectrum is defined only with phase shifters on")
    if cfg.kappa_T == 0:
        # vanishing prefactor: both spectra sit at shot noise
        return NoiseSpectrum(omega, np.ones_like(omega), tag)
    src = SpopoSource(cfg.kappa_T, cfg.profile())
    if stage == "in":
        return input_spectrum(src, omega)
    modes = schmidt_decompose(build_envelope_matrix(cfg.memory()))
    if cfg.retained > modes.count:
        raise ConfigError(f"retained must not exceed {modes.count}")
    return output_spectrum(modes, src, omega, cfg.retained)


def cmd_spectrum(cfg: RunConfig, stage: str) -> dict:
    spec = _spectrum(cfg, stage)
    buf = io.StringIO()
    spec.write_csv(buf)
    name = f"spectrum_{stage}.csv"
    gp = _gnuplot(name, f"{spec.stage} noise spectrum", "omega (dimensionless)", "S (shot noise = 1)",
                  "'{csv}' using 1:2 with lines")
    return {name: buf.getvalue(), f"spectrum_{stage}.gp": gp}


def _basis(cfg: RunConfig, src: SpopoSource):
    if cfg.basis == "empirical":
        return empirical_supermodes(src, cfg.supermodes)
    width = cfg.hermite_width if cfg.hermite_width is not None else default_hermite_width(src)
    return hermite_supermodes(cfg.profile(), width, cfg.supermodes)


def cmd_squeezing(cfg: RunConfig) -> dict:
    if cfg.input_db is None:
        raise ConfigError("squeezing needs input dB values (--input-db or input_db)")
    if len(cfg.input_db) != cfg.supermodes:
        raise ConfigError(f"need {cfg.supermodes} input dB values, got {len(cfg.input_db)}")
    if cfg.kappa_T == 0:
        raise ConfigError("squeezing needs kappa_T > 0 to build the supermode basis")
    src = SpopoSource(cfg.kappa_T, cfg.profile())
    modes = schmidt_decompose(build_envelope_matrix(cfg.memory()))
    report = supermode_squeezing_report(modes, _basis(cfg, src), cfg.input_db)
    buf = io.StringIO()
    report.write_csv(buf)
    gp = _gnuplot("squeezing.csv", "Supermode squeezing", "supermode", "squeezing (dB)",
                  "'{csv}' using 1:2 with boxes, '' using 1:4 with boxes")
    return {"squeezing.csv": buf.getvalue(), "squeezing.json": report.to_json(), "squeezing.gp": gp}


# ---------------------------------------------------------------- verify

# small train where T_W - t is exact enough in float64 for a 1e-12 comparison
IDENTITY_PROFILE = (10, 1.0, 4.0, 10.0)


def _check(name, fn, tolerance):
    try:
        error, detail = fn()
        passed = bool(error <= tolerance)
    except (ValueError, RuntimeError, QuadratureError) as exc:
        error, detail, passed = None, f"{type(exc).__name__}: {exc}", False
    return {"name": name, "passed": passed, "error": error, "tolerance": tolerance, "detail": detail}


def run_checks(cfg: RunConfig) -> list:
    state = {}

    def modes():
        if "modes" not in state:
            env = build_envelope_matrix(cfg.memory())
            state["env"] = env
            state["modes"] = schmidt_decompose(env)
        return state["modes"]

    def quadrature():
        modes()
        return state["env"].convergence, "relative change of the envelope matrix under node doubling"

    def identity():
        n, t0, period, length = IDENTITY_PROFILE
        mc = MemoryConfig(PulseTrainProfile(n, t0, period), MediumParams(length))
        rng = np.random.default_rng(cfg.seed)
        tw = mc.profile.train_duration
        t = rng.uniform(0.0, tw, 200)
        z = rng.uniform(0.0, length, 200)
        tt, zz = np.meshgrid(t, z, indexing="ij")
        diff = np.abs(write_kernel(mc, tw - tt, zz) - read_kernel(mc, tt, zz))
        return float(diff.max()), f"200x200 random grid, N={n}, T0={t0}, T={period}, L={length}"

    def orthonormality():
        m = modes()
        g = m.pulse_duration * m.modes @ m.modes.T
        return float(np.max(np.abs(g - np.eye(m.count)))), "max |T0 sum phi_i phi_j - delta_ij|"

    def budget():
        mc = MemoryConfig(PulseTrainProfile(min(cfg.n_pulses, 20), cfg.pulse_duration, cfg.period), MediumParams(cfg.length))
        rng = np.random.default_rng(cfg.seed)
        n = mc.profile.n_pulses
        field = EnvelopeField(rng.standard_normal(n) + 1j * rng.standard_normal(n), cfg.pulse_duration)
        st = integrate_write(field, mc, SolverGrid.default(mc))
        return st.budget_violation(), "|input - stored - transmitted| / input, write stage"

    def oracle():
        rep = kernel_equivalence_report(cfg.memory(), seed=cfg.seed, workers=cfg.workers)
        state["oracle"] = rep
        if rep["min_halving_ratio"] < 2.0:
            raise RuntimeError(f"step halving reduced the error only {rep['min_halving_ratio']:.2f}x")
        return rep["max_error"], f"N in (1, 5, 20), L in (2, 10); min halving ratio {rep['min_halving_ratio']:.3f}"

    def spectrum():
        m = modes()
        src = SpopoSource(cfg.kappa_T if cfg.kappa_T > 0 else 0.1, m.profile)
        w_modes = output_correlation(m, src)
        r = transfer_matrix(m, shifters=True)
        w_prop = (r @ src.correlation_matrix() @ r.T).real
        omega = cfg.omega_grid()
        a = cosine_series(offset_sums(w_modes), src.period, omega)
        b = cosine_series(offset_sums(w_prop), src.period, omega)
        coeff = src.kappa_T / (2.0 * m.n_pulses)
        return float(np.max(np.abs(coeff * (a - b)))), "coupling-matrix route vs transfer-matrix propagation"

    def bound():
        return float(modes().singular_values[0]), "largest singular value"

    return [
        _check("quadrature_convergence", quadrature, 1e-8),
        _check("read_write_kernel_identity", identity, 1e-12),
        _check("schmidt_orthonormality", orthonormality, 1e-10),
        _check("excitation_budget", budget, 1e-6),
        _check("oracle_equivalence", oracle, 1e-3),
        _check("spectrum_consistency", spectrum, 1e-9),
        _check("singular_value_bound", bound, 1.05),
    ]


def cmd_verify(cfg: RunConfig):
    checks = run_checks(cfg)
    passed = all(c["passed"] for c in checks)
    report = {"config": cfg.summary(), "checks": checks, "passed": passed}
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    return {"verify.json": text}, passed, checks


# ---------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="combmemory", description="Pulse-train Raman memory: modes, efficiency, noise spectra")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("eigen", "Schmidt singular values and mode samples"),
        ("efficiency", "writing efficiency versus pulse count"),
        ("spectrum", "input or output homodyne noise spectrum"),
        ("squeezing", "per-supermode squeezing before and after the memory"),
        ("verify", "run the self-consistency checks"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--out", help="output directory")
        p.add_argument("--shifters", help="phase shifters on/off (true/false)")
        p.add_argument("--retained", type=int, help="number of Schmidt modes kept")
        if name == "spectrum":
            p.add_argument("--stage", choices=("in", "out"), default="in")
        if name == "squeezing":
            p.add_argument("--input-db", help="comma-separated input squeezing in dB")
        if name == "efficiency":
            p.add_argument("--n-range", help="pulse counts A:B:STEP (inclusive)")
            p.add_argument("--lengths", help="comma-separated medium lengths")
    return ap


def _overrides(args) -> dict:
    ov = {"out": args.out, "retained": args.retained}
    if args.shifters is not None:
        flag = parse_bool(args.shifters)
        ov["phase_shifters"] = flag
        if args.command == "efficiency":
            ov["efficiency_shifters"] = flag
    if getattr(args, "input_db", None) is not None:
        ov["input_db"] = parse_float_list(args.input_db, "--input-db")
    if getattr(args, "n_range", None) is not None:
        ov["n_range"] = args.n_range
    if getattr(args, "lengths", None) is not None:
        ov["lengths"] = parse_float_list(args.lengths, "--lengths")
    return ov


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config, _overrides(args))
        if args.command == "verify":
            files, passed, checks = cmd_verify(cfg)
            write_outputs(cfg.out, files)
            for c in checks:
                err = "n/a" if c["error"] is None else f"{c['error']:.3e}"
                print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: error={err} tol={c['tolerance']:g}")
            return EXIT_OK if passed else EXIT_CHECK
        if args.command == "eigen":
            files = cmd_eigen(cfg)
        elif args.command == "efficiency":
            files = cmd_efficiency(cfg)
        elif args.command == "spectrum":
            files = cmd_spectrum(cfg, args.stage)
        else:
            files = cmd_squeezing(cfg)
    except (ConfigError, TypeError, ValueError, QuadratureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    write_outputs(cfg.out, files)
    for name in sorted(files):
        print(os.path.join(cfg.out, name))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
