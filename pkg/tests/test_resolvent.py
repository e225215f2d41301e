import numpy as np
import pytest

from gnlab.evans import evans_eval
from gnlab.linearization import free_potentials
from gnlab.model import MAT
from gnlab.resolvent import (ResolventError, delta_matrix, delta_residual, eq_inverse_check,
                             free_green, gamma_for, gamma_matrix, gamma_residual, green_eval,
                             lap_bound_probe, weighted_operator)


def test_gamma_matrix():
    rng = np.random.default_rng(5)
    for _ in range(10):
        B = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        G = gamma_matrix(B)
        assert abs(np.linalg.det(G) + 1) < 1e-12
        assert gamma_residual(B, G) < 1e-12
        assert np.allclose(G, G.conj().T)


def test_gamma_degenerate_row():
    with pytest.raises(ResolventError):
        gamma_matrix(np.array([[1, 2], [0, 0]]))


def test_determinant_identity_random():
    rng = np.random.default_rng(11)
    assert max(eq_inverse_check(rng) for _ in range(20)) < 1e-10


@pytest.mark.parametrize("lam", [0.3j, 0.2 + 0.5j, 1.1j])
def test_det_delta_is_E_squared(pot23, lam):
    E = evans_eval(lam, pot=pot23).E
    _, dd = delta_matrix(pot23, [-3.0, -0.4, 0.0, 2.2], lam)
    assert np.allclose(np.abs(dd), abs(E) ** 2, rtol=1e-8)


def _apply(pot, lam, u, x):
    # (JL - lambda) u by second-order differences
    du = np.gradient(u, x[1] - x[0], axis=0, edge_order=2)
    A = MAT.bold_beta - pot.omega * np.eye(4) + pot.at(x)
    return -du @ MAT.bold_alpha.T + np.einsum("ij,njk,nk->ni", MAT.J4, A, u) - lam * u


@pytest.mark.parametrize("lam", [0.3j, 0.2 + 0.5j])
def test_kernel_inverts_operator(pot23, lam):
    errs = []
    for h in (0.02, 0.01):
        op, x = weighted_operator(pot23, lam, 0.0, half_width=15, h=h)
        g = np.exp(-(x - 0.5) ** 2)[:, None] * np.array([1, 0.5j, -0.3, 0.2])
        u = op.matvec(g.ravel()).reshape(-1, 4)
        m = np.abs(x) < 10
        errs.append(np.abs(_apply(pot23, lam, u, x) - g)[m].max())
    assert errs[1] < 2e-3
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.1)


def test_free_kernel_closed_form(wave23):
    x = np.linspace(-5, 5, 21)
    for lam in (0.3j, 0.4 + 0.2j, 1.0j):
        G = green_eval(free_potentials(wave23), x, x, lam).G
        assert np.abs(G - free_green(lam, 0.3, x, x)).max() < 1e-8 * np.abs(G).max()


def test_reflection_symmetry(pot23):
    x = np.linspace(-3, 3, 9)
    y = np.array([-1.0, 0.3, 2.0])
    G = green_eval(pot23, x, y, 0.3j).G
    Gr = green_eval(pot23, -x, -y, 0.3j).G
    B = MAT.bold_beta
    assert np.abs(Gr - B @ G @ B).max() < 1e-8 * np.abs(G).max()


def test_kernel_independent_of_gamma(pot23):
    x = np.linspace(-2, 2, 5)
    g1 = green_eval(pot23, x, x, 0.3j).G
    g2 = green_eval(pot23, x, x, 0.3j, Gamma=np.array([[0, 1], [1, 0]], complex)).G
    assert np.abs(g1 - g2).max() < 1e-9 * np.abs(g1).max()
    assert abs(np.linalg.det(gamma_for(pot23, 0.3j)) + 1) < 1e-12


def test_swap_and_offset_agree(pot23):
    x = np.linspace(-2, 2, 5)
    a = green_eval(pot23, x, x, 1.1j, side="plus", mode="swap").G
    b = green_eval(pot23, x, x, 1.1j, side="plus", mode="offset").G
    assert np.abs(a - b).max() < 1e-4 * np.abs(a).max()


def test_delta_identity(pot23):
    for y in (0.0, 0.7, -2.0):
        off, jump = delta_residual(pot23, 0.3j, y)
        assert off < 1e-4 and jump < 1e-4


def test_undefined_at_eigenvalue(pot23):
    with pytest.raises(ResolventError):
        green_eval(pot23, [0.0], [1.0], 0.6j)


def test_lap_probe_validates_weight(pot23):
    with pytest.raises(ValueError):
        lap_bound_probe(pot23, 3.0, [0.5j])
