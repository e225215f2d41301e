import numpy as np
import pytest

from gnlab.model import MAT, make_power_model


def test_matrix_algebra():
    I4 = np.eye(4)
    assert np.allclose(MAT.bold_alpha @ MAT.bold_alpha, I4)
    assert np.allclose(MAT.bold_beta @ MAT.bold_beta, I4)
    assert np.allclose(MAT.J4 @ MAT.J4, -I4)
    # alpha and beta anticommute, both commute with J (complex-linear)
    assert np.allclose(MAT.bold_alpha @ MAT.bold_beta, -MAT.bold_beta @ MAT.bold_alpha)
    assert np.allclose(MAT.bold_alpha @ MAT.J4, MAT.J4 @ MAT.bold_alpha)
    assert np.allclose(MAT.Sigma, MAT.Sigma.conj().T)


def test_real_form_matches_complex_alpha():
    rng = np.random.default_rng(1)
    z = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    r = np.concatenate([z.real, z.imag])
    w = MAT.alpha2 @ z
    assert np.allclose(MAT.bold_alpha @ r, np.concatenate([w.real, w.imag]))
    # J represents multiplication by -i
    w = -1j * z
    assert np.allclose(MAT.J4 @ r, np.concatenate([w.real, w.imag]))


@pytest.mark.parametrize("k", [1, 2, 3])
def test_power_model_antiderivative(k):
    m = make_power_model(k)
    s = np.linspace(0.05, 0.9, 7)
    h = 1e-5
    assert np.allclose((m.F(s + h) - m.F(s - h)) / (2 * h), m.f(s), rtol=1e-8)
    assert np.allclose((m.f(s + h) - m.f(s - h)) / (2 * h), m.fprime(s), rtol=1e-8)


@pytest.mark.parametrize("k", [0, -1, 1.5, True])
def test_bad_exponent(k):
    with pytest.raises(ValueError):
        make_power_model(k)
