import math

import numpy as np
import pytest
from scipy import special

from combmemory.kernels import (
    MediumParams,
    MemoryConfig,
    QuadratureError,
    amplitude_kernel,
    bessel_j0,
    full_kernel,
    read_kernel,
    write_kernel,
)
from combmemory.profiles import DomainError, PulseTrainProfile

# mpmath.besselj(0, x) at 50 digits, rounded to double
J0_FROZEN = {
    0.5: 0.9384698072408129,
    1.0: 0.7651976865579666,
    3.0: -0.26005195490193345,
    7.5: 0.2663396578803784,
    15.0: -0.014224472826780772,
    25.0: 0.09626678327595811,
    120.0: 0.07182341582915613,
}


def series_j0(x, terms=40):
    """Independent power series, summed term by term in exact rationals."""
    from fractions import Fraction

    y = Fraction(x) ** 2 / 4
    total, term = Fraction(0), Fraction(1)
    for k in range(terms):
        total += term
        term *= -y / ((k + 1) ** 2)
    return float(total)


def adaptive_simpson(f, a, b, tol=1e-13, depth=50):
    def simpson(a, fa, b, fb):
        m = 0.5 * (a + b)
        fm = f(m)
        return m, fm, (b - a) / 6.0 * (fa + 4 * fm + fb)

    def rec(a, fa, b, fb, m, fm, whole, tol, depth):
        lm, flm, left = simpson(a, fa, m, fm)
        rm, frm, right = simpson(m, fm, b, fb)
        if depth <= 0 or abs(left + right - whole) <= 15 * tol:
            return left + right + (left + right - whole) / 15.0
        return rec(a, fa, m, fm, lm, flm, left, tol / 2, depth - 1) + rec(m, fm, b, fb, rm, frm, right, tol / 2, depth - 1)

    fa, fb = f(a), f(b)
    m, fm, whole = simpson(a, fa, b, fb)
    return rec(a, fa, b, fb, m, fm, whole, tol, depth)


def cfg_of(n=2, t0=1.0, period=4.0, length=10.0, **kw):
    return MemoryConfig(PulseTrainProfile(n, t0, period), MediumParams(length), **kw)


# ---------------------------------------------------------------- J0


def test_j0_zero_and_one():
    assert bessel_j0(0.0) == 1.0
    assert bessel_j0(1.0) == pytest.approx(series_j0(1.0), abs=1e-12)
    assert bessel_j0(1.0) == pytest.approx(0.765197686557967, abs=1e-12)


def test_j0_first_root():
    assert abs(bessel_j0(2.404825557695773)) < 1e-10


@pytest.mark.parametrize("x", sorted(J0_FROZEN))
def test_j0_frozen_values(x):
    assert bessel_j0(x) == pytest.approx(J0_FROZEN[x], abs=1e-12)
    assert bessel_j0(-x) == pytest.approx(J0_FROZEN[x], abs=1e-12)


def test_j0_matches_series_oracle_below_crossover():
    for x in np.linspace(0.0, 12.0, 61):
        assert abs(bessel_j0(x) - series_j0(x, 80)) <= 1e-12


def test_j0_dense_grid_against_scipy():
    x = np.linspace(-500, 500, 200001)
    assert np.max(np.abs(bessel_j0(x) - special.j0(x))) <= 1e-12


def test_j0_continuity_at_branch_switches():
    for x0 in (4.0, 20.0):
        x = np.array([x0 - 1e-9, x0, x0 + 1e-9])
        assert np.ptp(bessel_j0(x)) < 1e-8


@pytest.mark.parametrize("bad", [float("nan"), float("inf")])
def test_j0_rejects_nonfinite(bad):
    with pytest.raises(DomainError):
        bessel_j0(bad)


# ---------------------------------------------------------------- write / read kernels


def test_single_pulse_closed_forms():
    cfg = cfg_of(n=1, t0=1.0, period=1.0)
    t = np.linspace(0, 1, 11)
    for z in (0.0, 0.7, 9.0):
        ga = write_kernel(cfg, t, z)
        gb = read_kernel(cfg, t, z)
        np.testing.assert_allclose(ga, np.exp(-1j * (1 - t)) * special.j0(2 * np.sqrt(z * (1 - t))), atol=1e-13)
        np.testing.assert_allclose(gb, np.exp(-1j * t) * special.j0(2 * np.sqrt(z * t)), atol=1e-13)


def test_kernels_vanish_between_pulses():
    cfg = cfg_of(n=3)
    assert write_kernel(cfg, 2.0, 1.0) == 0
    assert read_kernel(cfg, 6.5, 3.0) == 0


def test_write_kernel_unit_modulus_at_entrance():
    cfg = cfg_of(n=4, t0=0.5, period=2.0)
    t = np.concatenate([s + np.linspace(0, 0.5, 7) for s in cfg.profile.pulse_starts()])
    np.testing.assert_allclose(np.abs(write_kernel(cfg, t, 0.0)), 1.0, atol=1e-15)


def test_read_kernel_at_origin():
    cfg = cfg_of(n=3)
    np.testing.assert_allclose(read_kernel(cfg, 0.0, np.linspace(0, 10, 5)), 1.0, atol=1e-15)


def test_kernel_domain_errors():
    cfg = cfg_of(n=2)
    for t, z in [(-0.1, 1.0), (5.01, 1.0), (1.0, -1.0), (1.0, 10.5), (float("nan"), 1.0)]:
        with pytest.raises(DomainError):
            write_kernel(cfg, t, z)
        with pytest.raises(DomainError):
            read_kernel(cfg, t, z)


def test_time_reversal_identity_small_train(rng):
    cfg = cfg_of(n=10, t0=1.0, period=4.0, length=10.0)
    tw = cfg.profile.train_duration
    t = rng.uniform(0, tw, 200)[:, None]
    z = rng.uniform(0, 10.0, 200)[None, :]
    assert np.max(np.abs(write_kernel(cfg, tw - t, z) - read_kernel(cfg, t, z))) <= 1e-12


def test_time_reversal_identity_at_headline_timing(rng, headline_cfg):
    # T_W ~ 9e5: the reflected time T_W - t carries a rounding error of
    # ulp(T_W) ~ 1e-10, and the kernel has unit slope in t
    tw = headline_cfg.profile.train_duration
    starts = headline_cfg.profile.pulse_starts()
    t = (starts[rng.integers(0, 90, 200)] + rng.uniform(0, 0.1, 200))[:, None]
    z = rng.uniform(0, 10.0, 200)[None, :]
    diff = np.max(np.abs(write_kernel(headline_cfg, tw - t, z) - read_kernel(headline_cfg, t, z)))
    resolution = 8 * math.ulp(tw) * (1 + 10.0)
    assert diff <= resolution


# ---------------------------------------------------------------- amplitude / full kernel


def test_amplitude_kernel_origin_is_length(headline_cfg):
    assert amplitude_kernel(headline_cfg, 0.0, 0.0) == pytest.approx(10.0, abs=1e-12)
    assert full_kernel(headline_cfg, 0.0, 0.0) == pytest.approx(10.0, abs=1e-12)


def test_amplitude_kernel_zero_off_pulse(headline_cfg):
    assert amplitude_kernel(headline_cfg, 500.0, 0.0) == 0.0


def test_amplitude_kernel_symmetric(headline_cfg, rng):
    starts = headline_cfg.profile.pulse_starts()
    t = starts[rng.integers(0, 90, 40)] + rng.uniform(0, 0.1, 40)
    tp = starts[rng.integers(0, 90, 40)] + rng.uniform(0, 0.1, 40)
    assert np.max(np.abs(amplitude_kernel(headline_cfg, t, tp) - amplitude_kernel(headline_cfg, tp, t))) <= 1e-14


@pytest.mark.parametrize(
    "t,tp,expected",
    [(0.05, 0.07, 9.99994000017833), (30000.03, 50000.08, 1.36815453960401), (890000.0, 10000.05, -0.03858610521521463)],
)
def test_amplitude_kernel_frozen(headline_cfg, t, tp, expected):
    # frozen from scipy.integrate.quad with scipy.special.j0
    assert amplitude_kernel(headline_cfg, t, tp) == pytest.approx(expected, rel=1e-8)


def test_amplitude_kernel_pulse_grid_vs_adaptive_simpson(headline_cfg):
    r = headline_cfg.profile.duty_cycle
    starts = headline_cfg.profile.pulse_starts()
    for m, k in [(0, 0), (3, 17), (45, 46), (89, 89), (10, 80)]:
        t, tp = starts[m], starts[k]
        ref = adaptive_simpson(lambda z: special.j0(2 * math.sqrt(r * z * t)) * special.j0(2 * math.sqrt(r * z * tp)), 0.0, 10.0)
        assert amplitude_kernel(headline_cfg, t, tp) == pytest.approx(ref, rel=1e-8, abs=1e-12)


def test_amplitude_kernel_node_doubling(headline_cfg):
    fine = MemoryConfig(headline_cfg.profile, headline_cfg.medium, quadrature_nodes=512)
    t = headline_cfg.profile.pulse_starts()[::3]
    a = amplitude_kernel(headline_cfg, t[:, None], t[None, :])
    b = amplitude_kernel(fine, t[:, None], t[None, :])
    assert np.max(np.abs(a - b)) / 10.0 < 1e-8


def test_amplitude_kernel_quadrature_error():
    cfg = cfg_of(n=90, t0=0.1, period=1.0e4, length=400.0, quadrature_nodes=16)
    with pytest.raises(QuadratureError):
        amplitude_kernel(cfg, 890000.0, 890000.0)


def test_amplitude_kernel_gram_psd(headline_cfg):
    t = headline_cfg.profile.pulse_starts()
    g = amplitude_kernel(headline_cfg, t[:, None], t[None, :])
    assert np.linalg.eigvalsh(g).min() >= -1e-10


def test_full_kernel_phase_and_symmetry(headline_cfg, rng):
    t = headline_cfg.profile.pulse_starts()[rng.integers(0, 90, 30)]
    tp = headline_cfg.profile.pulse_starts()[rng.integers(0, 90, 30)]
    k = full_kernel(headline_cfg, t, tp)
    np.testing.assert_allclose(np.abs(k), np.abs(amplitude_kernel(headline_cfg, t, tp)), atol=1e-14)
    np.testing.assert_allclose(k, full_kernel(headline_cfg, tp, t), atol=1e-14)
    assert not np.allclose(k, np.conj(full_kernel(headline_cfg, tp, t)))


def test_memory_config_validation(headline_profile):
    with pytest.raises(ValueError):
        MemoryConfig(headline_profile, MediumParams(10.0), quadrature_nodes=8)
    with pytest.raises(ValueError):
        MemoryConfig(headline_profile, MediumParams(10.0), envelope_rule="midpoint")
    with pytest.raises(ValueError):
        MediumParams(0.0)
