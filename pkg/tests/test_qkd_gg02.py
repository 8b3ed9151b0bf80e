import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from turbqkd.errors import ConfigurationError, UnphysicalStateError
from turbqkd.qkd_gg02 import (
    CovMatrix2Mode,
    Gg02Params,
    build_cov,
    g_fn,
    key_rate,
    key_rate_terms,
    mutual_information,
    optimize_vmod,
    symplectic_eigs,
)

physical = st.builds(
    Gg02Params,
    V_mod=st.floats(0.01, 50.0),
    T_f=st.floats(0.0, 1.0),
    xi_f=st.floats(0.0, 0.5),
    beta=st.floats(0.5, 1.0),
)


def test_cov_examples():
    m = build_cov(Gg02Params(3.0, 1.0, 0.0))
    assert (m.a, m.b, m.c) == (4.0, 4.0, pytest.approx(np.sqrt(15)))
    m = build_cov(Gg02Params(3.0, 0.0, 0.1))
    assert (m.b, m.c) == (1.0, 0.0)
    m = build_cov(Gg02Params(0.0, 0.5, 0.1))
    assert (m.a, m.c) == (1.0, 0.0)


def test_lossless_pure_state():
    nu = symplectic_eigs(build_cov(Gg02Params(7.0, 1.0, 0.0)))
    np.testing.assert_allclose(nu, 1.0, atol=1e-9)


def test_vacuum_modulation_product_state():
    m = build_cov(Gg02Params(0.0, 0.4, 0.2))
    nu1, nu2, nu3 = symplectic_eigs(m)
    assert sorted((nu1, nu2)) == pytest.approx(sorted((1.0, m.b)))
    assert nu3 == pytest.approx(1.0)


def test_g_values():
    assert g_fn(1.0) == 0.0
    assert g_fn(3.0) == 2.0
    with pytest.raises(ValueError):
        g_fn(0.5)


def test_key_rate_lossless():
    t = key_rate_terms(Gg02Params(3.0, 1.0, 0.0, 0.95))
    assert t.I_AB == pytest.approx(1.0, abs=1e-12)
    assert t.chi_BE == pytest.approx(0.0, abs=1e-9)
    assert t.K == pytest.approx(0.95, abs=1e-9)


def test_blocked_channel():
    t = key_rate_terms(Gg02Params(3.0, 0.0, 0.0))
    assert t.I_AB == 0.0 and t.K <= 0.0


def test_unphysical_matrix_rejected():
    with pytest.raises(UnphysicalStateError):
        symplectic_eigs(CovMatrix2Mode(2.0, 2.0, 5.0))


def test_invalid_params():
    with pytest.raises(ConfigurationError):
        Gg02Params(1.0, 1.2, 0.0)
    with pytest.raises(ConfigurationError):
        Gg02Params(1.0, 0.5, 0.0, beta=0.0)


def test_key_rate_decreases_with_noise():
    xs = np.linspace(0.0, 0.2, 41)
    ks = [key_rate(Gg02Params(5.0, 0.3, x)) for x in xs]
    assert np.all(np.diff(ks) < 0)


def test_optimize_fixed_noise():
    v, t = optimize_vmod(0.02, 0.5)
    assert 0.5 <= v <= 50
    assert t.K >= key_rate(Gg02Params(v + 0.1 if v < 50 else v - 0.1, 0.5, 0.02)) - 1e-12


@given(physical)
def test_det_identity(p):
    m = build_cov(p)
    nu1, nu2, _ = symplectic_eigs(m)
    assert nu1 * nu2 == pytest.approx(np.sqrt(np.linalg.det(m.matrix())), rel=1e-9, abs=1e-9)


@given(physical)
def test_eigenvalues_physical(p):
    assert min(symplectic_eigs(build_cov(p))) >= 1 - 1e-9


@given(physical)
def test_mutual_information_two_ways(p):
    # SNR form vs Bob's variance conditioned on Alice's (heterodyned) mode
    m = build_cov(p)
    via_cov = 0.5 * np.log2(m.b / (m.b - m.c**2 / (m.a + 1)))
    assert mutual_information(p) == pytest.approx(via_cov, abs=1e-9)


@given(st.floats(0.01, 1.0), st.floats(0.1, 50.0))
def test_pure_loss_holevo_non_negative(t, v):
    chi = key_rate_terms(Gg02Params(v, t, 0.0)).chi_BE
    assert np.isfinite(chi) and chi >= -1e-9


@given(st.floats(1.0, 1e4), st.floats(1e-6, 10.0))
def test_g_increasing(x, dx):
    assert g_fn(x + dx) > g_fn(x)
