import numpy as np
import pytest

from gnlab.linearization import (apply_JL, decay_fit, free_eigenstructure, free_potentials,
                                 free_residual, kernel_vectors, make_projector, norm,
                                 parity_error, phi4, potentials, two_omega_vectors, xi_pair)
from gnlab.model import make_power_model
from gnlab.solitary_wave import decay_rate, solve_wave


def test_kernel_and_jordan_chain(wave23):
    r = kernel_vectors(wave23).residuals
    assert r["JL_Jphi"] <= 1e-7
    assert r["JL_dxphi"] <= 1e-7
    assert r["JL_domphi"] <= 1e-5
    assert r["JL_jordan2"] <= 1e-5


@pytest.mark.parametrize("k,omega", [(2, 0.3), (3, 0.2), (1, 0.6)])
def test_two_omega_eigenvectors(k, omega):
    w = solve_wave(make_power_model(k), omega)
    vp, vm = two_omega_vectors(w)
    pot = potentials(w)
    n = norm(w, vp)
    assert norm(w, apply_JL(w, vp, pot) - 2j * omega * vp) / n < 1e-6
    assert norm(w, apply_JL(w, vm, pot) + 2j * omega * vm) / n < 1e-6
    # swapping the pairing is wrong by O(1)
    assert norm(w, apply_JL(w, vp, pot) + 2j * omega * vp) / n > 0.1


def test_parities(wave23):
    kb = kernel_vectors(wave23)
    assert parity_error(kb.phi, "X") < 1e-12
    assert parity_error(kb.Jphi, "X") < 1e-12
    assert parity_error(kb.dxphi, "Xperp") < 1e-10
    vp, _ = two_omega_vectors(wave23)
    assert parity_error(vp, "Xperp") < 1e-12


def test_projector(wave23):
    kb = kernel_vectors(wave23)
    P = make_projector(wave23, kb)
    rng = np.random.default_rng(3)
    psi = rng.standard_normal(kb.phi.shape) * np.exp(-kb.x ** 2 / 10)[:, None]
    a = P.pd(psi)
    assert norm(wave23, P.pd(a) - a) < 1e-10 * norm(wave23, psi)
    # the generalized kernel is reproduced exactly
    for v in (kb.domphi, kb.Jphi):
        assert norm(wave23, P.pd(v) - v) < 1e-10 * norm(wave23, v)


def test_potential_decay(pot23):
    rate, _ = decay_fit(pot23)
    assert rate == pytest.approx(4 * decay_rate(0.3), rel=0.02)


def test_corrupted_potential_fails_decay(wave23):
    rate, _ = decay_fit(potentials(wave23, corrupt=1e-3))
    assert abs(rate - 4 * decay_rate(0.3)) > 0.5


def test_potential_symmetry(pot23):
    x = np.array([0.3, 1.7, 4.0])
    W, Wm = pot23.at(x), pot23.at(-x)
    B = np.diag([1.0, -1.0, 1.0, -1.0])
    assert np.allclose(Wm, B @ W @ B)
    assert np.allclose(W, np.swapaxes(W, -1, -2))
    assert np.all(free_potentials(pot23.wave).at(x) == 0)


@pytest.mark.parametrize("lam", [0.4j, 1.5j, 0.2 + 0.9j, 0.3])
def test_free_eigenstructure(lam):
    fe = free_eigenstructure(lam, 0.3)
    assert free_residual(fe) < 1e-12
    xi1, xi2 = xi_pair(lam, 0.3)
    assert (0.3 - 1j * lam) ** 2 - 1 == pytest.approx(xi1 ** 2, abs=1e-12)
    assert (0.3 + 1j * lam) ** 2 - 1 == pytest.approx(xi2 ** 2, abs=1e-12)


def test_phi4_layout(wave23):
    p = phi4(wave23)
    x, v, u = wave23.full_line()
    assert np.array_equal(p[:, 0], v) and np.array_equal(p[:, 1], u)
    assert not p[:, 2:].any()
