import numpy as np
import pytest

from gnlab.model import make_power_model
from gnlab.solitary_wave import WaveError, decay_check, decay_rate, solve_wave


@pytest.mark.parametrize("omega", [0.2, 0.5, 0.8])
def test_cubic_closed_forms(omega):
    # for f(s) = s the charge and energy are known in closed form
    w = solve_wave(make_power_model(1), omega)
    d = np.sqrt(1 - omega ** 2)
    assert w.Q == pytest.approx(2 * d / omega, rel=1e-9)
    assert w.En == pytest.approx(2 * np.arctanh(d), rel=1e-9)
    assert w.dQdomega == pytest.approx(-2 / (omega ** 2 * d), rel=1e-6)


def test_first_integral_and_ode(wave23):
    assert np.abs(wave23.first_integral()).max() < 1e-10
    assert wave23.ode_residual() < 1e-6


def test_profile_parity_and_tail(wave23):
    x, v, u = wave23.full_line()
    assert np.allclose(v, v[::-1])
    assert np.allclose(u, -u[::-1])
    assert abs(v[0]) < 1e-12 and abs(u[0]) < 1e-12
    assert decay_check(wave23) == pytest.approx(decay_rate(0.3), rel=1e-3)


def test_profile_interpolation(wave23):
    xs = np.array([0.0, 0.37, 2.5, -1.2])
    v, u = wave23.profile(xs)
    x, vf, uf = wave23.full_line()
    assert np.allclose(v, np.interp(xs, x, vf), atol=1e-5)
    assert u[0] == pytest.approx(0.0, abs=1e-14)


def test_vakhitov_kolokolov_signs():
    # k = 3 near the upper threshold is charge-increasing, k = 1 never is
    assert solve_wave(make_power_model(3), 0.9).dQdomega > 0
    assert solve_wave(make_power_model(1), 0.5).dQdomega < 0
    assert solve_wave(make_power_model(2), 0.3).dQdomega < 0


@pytest.mark.parametrize("omega", [0.0, 1.0, -0.2, 1.3])
def test_omega_out_of_range(omega):
    with pytest.raises(ValueError):
        solve_wave(make_power_model(2), omega)


def test_wave_error_is_runtime():
    assert issubclass(WaveError, Exception)


@pytest.mark.parametrize("k,omega", [(2, 0.3), (2, 0.6), (3, 0.5)])
def test_energy_charge_identity(k, omega):
    # dE/domega = omega dQ/domega along the family
    m = make_power_model(k)
    h = 1e-3
    dE = (solve_wave(m, omega + h, derivatives=False).En
          - solve_wave(m, omega - h, derivatives=False).En) / (2 * h)
    assert dE == pytest.approx(omega * solve_wave(m, omega).dQdomega, rel=1e-5)
