import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from turbqkd.turbulence import (
    HvProfile,
    ScaleProfile,
    SlantPath,
    cn2,
    cn2_integral,
    fried_horizontal,
    fried_slant,
    outer_scale,
    scintillation_theory,
    weighted_cn2_integral,
)

LAM = 1.55e-6
HV = HvProfile()


def midpoint(f, a, b, n=10**6):
    h = (np.arange(n) + 0.5) * (b - a) / n + a
    return f(h).sum() * (b - a) / n


def test_cn2_at_ground():
    assert cn2(HV, 0.0) == pytest.approx(1.7e-14 + 2.7e-16, rel=1e-12)


def test_cn2_at_10km_by_terms():
    h = 1e4
    expect = 0.00594 * (21 / 27) ** 2 * (0.1) ** 10 * np.exp(-10) + 2.7e-16 * np.exp(-h / 1500) + 1.7e-14 * np.exp(-100)
    assert cn2(HV, h) == pytest.approx(expect, rel=1e-12)


def test_cn2_decays_at_altitude():
    assert cn2(HV, 2e5) < 1e-30


def test_cn2_negative_altitude():
    with pytest.raises(ValueError):
        cn2(HV, -1.0)


@pytest.mark.parametrize("h,L0", [(8500.0, 4.0), (11000.0, 2.0), (0.0, 4 / (1 + 3.4**2))])
def test_outer_scale(h, L0):
    assert outer_scale(h) == pytest.approx(L0, rel=1e-12)


def test_inner_scale_ratio():
    assert ScaleProfile().inner(8500.0) == pytest.approx(0.02)


def test_fried_horizontal_table_value():
    assert fried_horizontal(2.47e-13, 150.0, LAM) == pytest.approx(0.036, abs=1e-3)


def test_fried_horizontal_scaling():
    r1 = fried_horizontal(1e-14, 100.0, LAM)
    r2 = fried_horizontal(1e-14, 200.0, LAM)
    assert r2 / r1 == pytest.approx(2 ** (-3 / 5), rel=1e-12)
    assert fried_horizontal(0.0, 100.0, LAM) == np.inf


def test_fried_slant_sec_scaling():
    r0 = fried_slant(HV, SlantPath(2e3, 4e3, 0.0, LAM))
    r60 = fried_slant(HV, SlantPath(2e3, 4e3, 60.0, LAM))
    assert r60 / r0 == pytest.approx(2 ** (-3 / 5), rel=1e-9)


def test_fried_slant_matches_horizontal_for_flat_profile():
    # no ground term, high slab: Cn2 varies by < 0.1 % over 2 m
    prof = HvProfile(ground_cn2=0.0)
    h = 50_000.0
    r_s = fried_slant(prof, SlantPath(h, h + 2.0, 30.0, LAM))
    r_h = fried_horizontal(cn2(prof, h + 1.0), 2.0 / np.cos(np.radians(30)), LAM)
    assert r_s == pytest.approx(r_h, rel=1e-3)


def test_slab_must_be_ordered():
    with pytest.raises(ValueError):
        SlantPath(3e3, 2e3, 0.0, LAM)


@pytest.mark.parametrize("a,b", [(0.0, 3e3), (2e3, 2e4), (2e4, 3e5)])
def test_cn2_integral_vs_midpoint(a, b):
    ref = midpoint(lambda h: cn2(HV, h), a, b)
    assert cn2_integral(HV, a, b) == pytest.approx(ref, rel=1e-6)


def test_weighted_integral_vs_midpoint():
    # substitution h = h0 + u^(6/11) removes the endpoint cusp for the brute-force oracle
    h0, H = 2e3, 3e5
    U = (H - h0) ** (11 / 6)

    def integrand(u):
        h = h0 + u ** (6 / 11)
        return cn2(HV, h) * (6 / 11)

    ref = midpoint(integrand, 0.0, U, n=4 * 10**6)
    assert weighted_cn2_integral(HV, h0, H, h0) == pytest.approx(ref, rel=1e-6)


def test_theory_sec_scaling():
    s0 = scintillation_theory(HV, 2e3, 3e5, 0.0, LAM)
    s = scintillation_theory(HV, 2e3, 3e5, 45.0, LAM)
    assert s / s0 == pytest.approx(np.sqrt(2) ** (11 / 6), rel=1e-12)


def test_theory_without_ground_term_reproduces_reference_column():
    # the tabulated theory column (0.054 ... 0.193) comes out of the HV profile
    # with A = 0 integrated from sea level
    table = [0.054, 0.056, 0.061, 0.070, 0.088, 0.121, 0.193]
    prof = HvProfile(ground_cn2=0.0)
    for z, ref in zip(range(0, 61, 10), table):
        assert scintillation_theory(prof, 0.0, 3e5, z, LAM) == pytest.approx(ref, rel=0.01)


@given(st.floats(0.0, 1e5))
def test_cn2_positive(h):
    assert cn2(HV, h) > 0


@given(st.floats(0.0, 74.0), st.floats(0.1, 1.0))
def test_theory_increasing_in_zenith(z, dz):
    assert scintillation_theory(HV, 0.0, 3e5, z + dz, LAM) > scintillation_theory(HV, 0.0, 3e5, z, LAM)


@given(st.floats(0.0, 1e4), st.floats(10.0, 5e3), st.floats(10.0, 5e3))
def test_fried_slant_shrinks_with_wider_slab(lo, width, extra):
    a = fried_slant(HV, SlantPath(lo, lo + width, 0.0, LAM))
    b = fried_slant(HV, SlantPath(lo, lo + width + extra, 0.0, LAM))
    assert b < a
