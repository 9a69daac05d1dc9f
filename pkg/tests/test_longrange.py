import math

import numpy as np
import pytest

from trimqdt.longrange import (MultipoleParams, hydrogenic_moment,
                               hydrogenic_radial, k_body_longrange,
                               lambda_list, load_multipole, p2_angular)


def closed_form_r3(n, l):
    return 1.0 / (n ** 3 * l * (l + 0.5) * (l + 1.0))


def closed_form_r4(n, l):
    return (3.0 * n * n - l * (l + 1.0)) / (
        2.0 * n ** 5 * (l + 1.5) * (l + 1.0) * (l + 0.5) * l * (l - 0.5))


def test_moments_match_closed_forms():
    for n in range(3, 9):
        for l in range(2, n):
            m3 = hydrogenic_moment(n, l, -3)
            m4 = hydrogenic_moment(n, l, -4)
            assert m3 == pytest.approx(closed_form_r3(n, l), rel=1e-8)
            assert m4 == pytest.approx(closed_form_r4(n, l), rel=1e-8)


def test_specific_moment_value():
    assert hydrogenic_moment(3, 2, -3) == pytest.approx(1.0 / 405.0,
                                                        rel=1e-10)


def test_moment_scaling_with_n():
    r10 = hydrogenic_moment(10, 2, -3)
    r20 = hydrogenic_moment(20, 2, -3)
    assert r10 / r20 == pytest.approx(8.0, rel=1e-6)  # ~ n^-3 at fixed l


def test_low_l_rejected():
    with pytest.raises(ValueError):
        hydrogenic_moment(3, 0, -3)
    with pytest.raises(ValueError):
        hydrogenic_moment(3, 3, -3)


def test_radial_normalization():
    r = np.exp(np.linspace(math.log(1e-4), math.log(400.0), 3000))
    from scipy.integrate import simpson
    for (n, l) in [(2, 1), (4, 2), (7, 6)]:
        R = hydrogenic_radial(n, l, r)
        norm = simpson(R * R * r ** 3, x=np.log(r))
        assert norm == pytest.approx(1.0, rel=1e-9)


def test_p2_matrix_elements():
    assert p2_angular(2, 0, 0) == pytest.approx(2.0 / 7.0, rel=1e-12)
    assert p2_angular(2, 2, 2) == pytest.approx(-2.0 / 7.0, rel=1e-12)
    assert p2_angular(2, -2, -2) == pytest.approx(-2.0 / 7.0, rel=1e-12)
    assert p2_angular(2, 1, 1) == pytest.approx(1.0 / 7.0, rel=1e-12)
    assert p2_angular(2, 1, -1) == 0.0
    total = sum(p2_angular(2, L, L) for L in range(-2, 3))
    assert total == pytest.approx(0.0, abs=1e-13)


def test_p2_numerical_quadrature_oracle():
    from scipy.special import sph_harm_y

    x, w = np.polynomial.legendre.leggauss(40)
    theta = np.arccos(x)
    p2 = 0.5 * (3 * x ** 2 - 1)
    for l in (2, 3):
        for L in range(0, l + 1):
            y = sph_harm_y(l, L, theta, 0.0)
            val = 2 * math.pi * np.sum(w * p2 * np.abs(y) ** 2)
            assert p2_angular(l, L, L) == pytest.approx(val, abs=1e-12)


def test_isotropic_only_limit():
    p = MultipoleParams(Q2=0.0, alpha_iso=0.7, gamma_aniso=0.0)
    lams, K = k_body_longrange(3, 2, p)
    m4 = hydrogenic_moment(3, 2, -4)
    assert np.allclose(K, K[0])
    assert K[0] == pytest.approx(27.0 * math.pi * 0.7 / 2.0 * m4, rel=1e-12)
    # literal first-order formula without the bound-state density factor
    _, K_raw = k_body_longrange(3, 2, p, energy_normalized=False)
    assert K_raw[0] == pytest.approx(math.pi * 0.7 / 2.0 * m4, rel=1e-12)


def test_quadrupole_only_ratio():
    p = MultipoleParams(Q2=0.5, alpha_iso=1e-300, gamma_aniso=0.0)
    lams, K = k_body_longrange(3, 2, p)
    by = dict(zip(lams, K))
    assert by[0] / by[2] == pytest.approx(-1.0, rel=1e-12)


def test_defects_order_of_magnitude_for_example_constants():
    p = MultipoleParams(Q2=-1.15, alpha_iso=0.7, gamma_aniso=-0.4)
    _, K = k_body_longrange(3, 2, p)
    defects = np.abs(K) / math.pi
    assert defects.max() < 0.05
    assert defects.max() > 0.003  # "of the order of 0.01"


def test_l1_rejected_by_default():
    p = MultipoleParams(Q2=-1.0, alpha_iso=0.7, gamma_aniso=-0.4)
    with pytest.raises(ValueError):
        k_body_longrange(3, 1, p)
    lams, K = k_body_longrange(3, 1, p, allow_l1=True)
    assert len(lams) == 3


def test_perturbative_warning():
    p = MultipoleParams(Q2=-20.0, alpha_iso=0.5, gamma_aniso=0.0)
    with pytest.warns(UserWarning, match="first-order"):
        k_body_longrange(3, 2, p)


def test_lambda_list_order():
    assert lambda_list(2) == (0, 1, -1, 2, -2)
    assert lambda_list(1) == (0, 1, -1)


def test_multipole_file_loader(tmp_path):
    f = tmp_path / "mp.txt"
    f.write_text("# example\nQ2 = -1.0\nalpha = 0.7\ngamma = -0.4\n")
    p = load_multipole(f)
    assert p.Q2 == -1.0 and p.alpha_iso == 0.7 and p.gamma_aniso == -0.4
    f2 = tmp_path / "bad.txt"
    f2.write_text("Q2 = -1.0\n")
    with pytest.raises(ValueError):
        load_multipole(f2)
    with pytest.raises(ValueError):
        MultipoleParams(Q2=0.0, alpha_iso=-1.0, gamma_aniso=0.0)
