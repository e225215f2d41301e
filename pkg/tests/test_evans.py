import numpy as np
import pytest

from gnlab.evans import (EvansError, complex_winding_scan, evans_eval, krein_signature,
                         locate_zero, parity_classify_zero, scan_segment, threshold_probe,
                         track_curve, winding_number, rectangle)
from gnlab.linearization import free_potentials, potentials
from gnlab.model import make_power_model
from gnlab.solitary_wave import solve_wave


@pytest.fixture(scope="module")
def pot39():
    return potentials(solve_wave(make_power_model(3), 0.9, derivatives=False))


def test_winding_counts_polynomial_roots():
    f = lambda z: (np.asarray(z) - 0.3j) ** 2 * (np.asarray(z) + 1)
    assert winding_number(f, rectangle(0.3j, 0.1))[0] == 2
    assert winding_number(f, rectangle(-1, 0.1))[0] == 1
    assert winding_number(f, rectangle(2.0, 0.5))[0] == 0


def test_kernel_at_origin(pot23):
    # the generalized kernel makes E vanish to fourth order at 0
    e1 = abs(evans_eval(1e-2, pot=pot23).value("full", True))
    e2 = abs(evans_eval(2e-2, pot=pot23).value("full", True))
    assert e2 / e1 == pytest.approx(16, rel=0.05)


def test_factorization(pot23):
    for lam in (0.3 + 0.9j, 0.45j, 1.8j):
        s = evans_eval(lam, pot=pot23)
        assert abs(s.E) == pytest.approx(4 * abs(s.E_X) * abs(s.E_Xperp), rel=1e-8)
        assert s.drift < 1e-8


@pytest.mark.parametrize("Lam", [30, 50, 80])
def test_large_lambda_limit(pot23, Lam):
    assert abs(abs(evans_eval(1j * Lam, pot=pot23).E) - 1) < 0.01


def test_two_omega_zero_has_xperp_parity(pot23):
    _, br = scan_segment(pot23, "imaginary", 0.4, 0.8, 200, "Xperp")
    assert len(br) == 1
    z = locate_zero(pot23, br[0].lam, "Xperp", on_axis=True)
    assert abs(z.lam - 0.6j) < 1e-6
    assert z.multiplicity == 1
    assert parity_classify_zero(pot23, z.lam) == "Xperp"
    assert abs(evans_eval(z.lam, pot=pot23).E_X) > 1e-3


def test_real_zero_k3(pot39):
    _, br = scan_segment(pot39, "real", 0.0008, 0.59, 300, "full")
    assert len(br) == 1
    z = locate_zero(pot39, br[0].lam)
    assert z.lam.real == pytest.approx(0.114125584, abs=1e-8)
    assert abs(z.lam.imag) < 1e-10
    assert parity_classify_zero(pot39, z.lam) == "X"


def test_rectangle_scan_sees_real_zero(pot39):
    # oracle for the off-axis scan: a box straddling the real zero counts it
    from gnlab.evans import evans_function
    w = winding_number(evans_function(pot39), [0.05 - 0.05j, 0.2 - 0.05j, 0.2 + 0.05j, 0.05 + 0.05j])
    assert w[0] == 1


def test_no_off_axis_zeros_k2(pot23):
    r = complex_winding_scan(pot23)
    assert r.clean


def test_krein_signs(pot23):
    a = krein_signature(pot23, 0.6j)
    b = krein_signature(pot23, -0.6j)
    assert {a.sign, b.sign} == {1, -1}
    assert abs(a.value) == pytest.approx(a.norm2, rel=1e-6)


def test_threshold_probe(wave23, pot23):
    # the free problem is resonant at the gap edge, the soliton generically not
    free = threshold_probe(free_potentials(wave23), "gap_edge")
    assert free.resonance
    real = threshold_probe(pot23, "gap_edge")
    assert not real.resonance
    assert abs(real.E_extrapolated) > 1e-3


def test_track_two_omega_curve():
    c = track_curve(make_power_model(2), 0.1, 0.25, 0.025, 0.2j, "Xperp")
    im = np.array([l.imag for l in c.lambdas])
    assert np.allclose(im, 2 * np.array(c.omegas), atol=1e-7)
    assert all(m == 1 for m in c.multiplicities)


def test_not_a_zero(pot23):
    with pytest.raises(EvansError):
        parity_classify_zero(pot23, 0.45j)


@pytest.mark.parametrize("lam", [0.3 + 0.9j, 0.2 + 0.4j, 0.5 - 1.7j])
def test_quadrant_symmetry(pot23, lam):
    # E(conj lam) = conj E(lam) and E(-lam) = E(lam) for the analytic variant
    from gnlab.evans import evans_function
    v = evans_function(pot23)([lam, np.conj(lam), -lam])
    assert v[1] == pytest.approx(np.conj(v[0]), rel=1e-9)
    assert v[2] == pytest.approx(v[0], rel=1e-9)
