"""Acceptance criteria 1-9; one PASS/FAIL line each in the terminal summary."""
import time

import numpy as np
import pytest

from gnlab.evans import (complex_winding_scan, evans_eval, locate_zero, parity_classify_zero,
                         scan_segment)
from gnlab.evolution import (Grid, Perturbation, RunConfig, boundary_scaling_experiment, charge,
                             evolve_run, init_state, parity_error, richardson_ratio, step)
from gnlab.linearization import free_potentials, kernel_vectors, potentials
from gnlab.model import make_power_model
from gnlab.resolvent import (delta_matrix, delta_residual, free_green, gamma_for, gamma_matrix,
                             gamma_residual, green_eval)
from gnlab.solitary_wave import solve_wave


def _pot(k, w):
    return potentials(solve_wave(make_power_model(k), w, derivatives=False))


def record(log, n, ok, detail, t0, budget):
    dt = time.time() - t0
    ok = ok and dt < budget
    log.append(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}  ({dt:.1f} s of {budget} s)")
    return ok


def test_c1_kernel_and_jordan(acceptance_log):
    t0 = time.time()
    w = solve_wave(make_power_model(2), 0.3, n=8192)
    r = kernel_vectors(w, check=False).residuals
    ok = (r["JL_Jphi"] <= 1e-7 and r["JL_dxphi"] <= 1e-7
          and r["JL_domphi"] <= 1e-5 and r["JL_jordan2"] <= 1e-5)
    detail = ", ".join(f"{k}={v:.2e}" for k, v in r.items())
    assert record(acceptance_log, 1, ok, detail, t0, 30), detail


def test_c2_two_omega_eigenvalues(acceptance_log):
    t0 = time.time()
    worst, notes = 0.0, []
    ok = True
    for k in (2, 3):
        for w in (0.1, 0.2, 0.3):
            pot = _pot(k, w)
            _, br = scan_segment(pot, "imaginary", 2 * w - 0.1, 2 * w + 0.1, 120, "Xperp")
            near = [b for b in br if abs(b.lam - 2j * w) < 0.02]
            if not near:
                ok = False
                notes.append(f"k={k} w={w}: no bracket")
                continue
            z = locate_zero(pot, near[0].lam, "Xperp", on_axis=True)
            err = abs(z.lam - 2j * w)
            par = parity_classify_zero(pot, z.lam)
            ex = abs(evans_eval(z.lam, pot=pot).E_X)
            worst = max(worst, err)
            if err > 1e-4 or par != "Xperp" or ex < 1e-3:
                ok = False
                notes.append(f"k={k} w={w}: err={err:.1e} parity={par} |E_X|={ex:.1e}")
    detail = f"max |lambda - 2 omega i| = {worst:.1e}" + ("; " + "; ".join(notes) if notes else "")
    assert record(acceptance_log, 2, ok, detail, t0, 180), detail


def test_c3_large_lambda(acceptance_log):
    t0 = time.time()
    vals = [abs(evans_eval(1j * L, pot=_pot(k, w)).E)
            for k in (1, 2, 3) for w in (0.2, 0.3) for L in (30, 50, 80)]
    ok = all(0.9 <= v <= 1.1 for v in vals)
    detail = f"|E| in [{min(vals):.5f}, {max(vals):.5f}] over 18 cases"
    assert record(acceptance_log, 3, ok, detail, t0, 60), detail


def _zeros(pot, axis, lo, hi, n, parity):
    _, br = scan_segment(pot, axis, lo, hi, n, parity)
    out = []
    for b in br:
        z = locate_zero(pot, b.lam, parity, on_axis=axis == "imaginary")
        if z.multiplicity >= 1:
            out.append(z.lam)
    return out


def test_c4_stability_windows(acceptance_log):
    t0 = time.time()
    notes = []
    p = _pot(2, 0.15)
    zx = _zeros(p, "imaginary", 0.005, 1.15, 600, "X")
    notes.append(f"k=2 w=0.15 X zeros {[f'{z.imag:.4f}i' for z in zx]}")
    ok = len(zx) >= 1
    p = _pot(2, 0.28)
    z0 = _zeros(p, "imaginary", 0.005, 1.28, 600, "X") + _zeros(p, "real", 0.0008, 0.59, 300, "full")
    notes.append(f"k=2 w=0.28 {len(z0)} zeros")
    ok = ok and not z0
    for w in (0.2, 0.3):
        p = _pot(3, w)
        z3 = _zeros(p, "imaginary", 0.005, 1 + w, 600, "X") + _zeros(p, "real", 0.0008, 0.59, 300, "full")
        notes.append(f"k=3 w={w} {len(z3)} zeros")
        ok = ok and not z3
    zr = _zeros(_pot(3, 0.9), "real", 0.0008, 0.59, 300, "full")
    notes.append(f"k=3 w=0.9 real zeros {[f'{z.real:.6f}' for z in zr]}")
    ok = ok and len(zr) == 1 and abs(zr[0].imag) < 1e-10
    detail = "; ".join(notes)
    assert record(acceptance_log, 4, ok, detail, t0, 600), detail


def test_c5_resolvent_identities(acceptance_log):
    t0 = time.time()
    wave = solve_wave(make_power_model(2), 0.3)
    pot = potentials(wave)
    rng = np.random.default_rng(2024)
    det_err = 0.0
    for _ in range(20):
        lam = complex(rng.uniform(0.05, 0.6), rng.uniform(-2.0, 2.0))
        y = rng.uniform(-6, 6)
        E = evans_eval(lam, pot=pot).E
        dd = delta_matrix(pot, y, lam)[1][0]
        det_err = max(det_err, abs(abs(dd) - abs(E) ** 2) / abs(E) ** 2)
    g_err = 0.0
    for lam in (0.3j, 0.2 + 0.9j, 1.1j, 0.4 - 0.5j):
        G = gamma_for(pot, lam)
        B = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        Gb = gamma_matrix(B)
        g_err = max(g_err, abs(np.linalg.det(G) + 1), abs(np.linalg.det(Gb) + 1), gamma_residual(B, Gb))
    d_err = max(max(delta_residual(pot, lam, y)) for lam, y in ((0.3j, 0.7), (0.2 + 0.9j, -1.3)))
    xs = np.linspace(-5, 5, 21)
    f_err = 0.0
    for lam in (0.3j, 0.4 + 0.2j, 1.0j):
        fg = green_eval(free_potentials(wave), xs, xs, lam).G
        f_err = max(f_err, np.abs(fg - free_green(lam, 0.3, xs, xs)).max() / np.abs(fg).max())
    ok = det_err <= 1e-8 and g_err <= 1e-12 and d_err <= 1e-4 and f_err <= 1e-8
    detail = f"det {det_err:.1e}, gamma {g_err:.1e}, delta {d_err:.1e}, free {f_err:.1e}"
    assert record(acceptance_log, 5, ok, detail, t0, 120), detail


def test_c6_no_complex_spectrum(acceptance_log):
    t0 = time.time()
    bad = []
    n = 0
    for k in (1, 2, 3):
        for w in (0.1, 0.2, 0.3, 0.4, 0.5):
            r = complex_winding_scan(_pot(k, w))
            n += 1
            if not r.clean:
                bad.append(f"k={k} w={w} winding {r.windings}")
    ok = not bad
    detail = f"{n} models, winding 0 off the axes" if ok else "; ".join(bad)
    assert record(acceptance_log, 6, ok, detail, t0, 900), detail


def test_c7_conservation_and_order(acceptance_log):
    t0 = time.time()
    wave = solve_wave(make_power_model(2), 0.3, derivatives=False)
    grid = Grid(100.0, 1024)
    st, _ = init_state(wave, [Perturbation(1, 1e-2, 2.0, "even")], grid, 0.02)
    Q0 = charge(st.psi, grid)
    step(st, nsteps=10000)
    dq = abs(charge(st.psi, grid) - Q0) / Q0
    pe = parity_error(st.psi, grid)
    _, _, ratio = richardson_ratio(RunConfig(k=2, omega0=0.3, eps=1e-2, L=100, N=1024, dt=0.04, T=5))
    ok = dq <= 1e-10 and pe <= 1e-12 and abs(ratio - 4.0) <= 0.3
    detail = f"Q drift {dq:.1e} / 1e4 steps, parity {pe:.1e}, dt-ratio {ratio:.3f}"
    assert record(acceptance_log, 7, ok, detail, t0, 300), detail


def test_c8_stability_and_instability(acceptance_log):
    t0 = time.time()
    r = evolve_run(RunConfig(k=2, omega0=0.3, eps=1e-2, L=200, N=2048, dt=0.02, T=200, absorb=True))
    t = np.array(r.track.times)
    w = np.array(r.track.omega_t)
    var = [np.ptp(w[(t >= a) & (t < a + 25)]) for a in range(0, 200, 25)]
    cauchy = all(b < a for a, b in zip(var, var[1:]))
    z = np.array(r.track.Z_weighted)
    decay = z.max() / z[-1]
    u = evolve_run(RunConfig(k=3, omega0=0.9, eps=1e-3, L=200, N=2048, dt=0.02, T=150, absorb=True))
    zl = np.array(u.track.Z_L2)
    growth = zl.max() / zl[0]
    ok = cauchy and decay >= 3 and growth >= 10
    detail = (f"omega window variation {var[0]:.1e} -> {var[-1]:.1e} (monotone {cauchy}), "
              f"weighted Z decay x{decay:.1f}, unstable growth x{growth:.0f}")
    assert record(acceptance_log, 8, ok, detail, t0, 1200), detail


def test_c9_boundary_artifact_scaling(acceptance_log):
    t0 = time.time()
    h, Ls = 0.25, [100.0, 200.0, 400.0]
    base = RunConfig(k=2, omega0=0.3, eps=1e-2, L=Ls[0], N=int(Ls[0] / h), dt=0.12, T=3000,
                     extract_every=1.0, absorb=False)
    rows = boundary_scaling_experiment(base, Ls, 3000)
    on = [r.onset for r in rows]
    ok = all(o is not None and np.isfinite(o) for o in on) and on[0] < on[1] < on[2]
    detail = "onsets " + ", ".join(f"L={r.L:g}: {r.onset:.0f}" for r in rows)
    assert record(acceptance_log, 9, ok, detail, t0, 900), detail
