"""Command line front end.

    gnlab wave --k 2 --omega 0.3
    gnlab evans scan|locate|track ...
    gnlab spectrum sweep ...
    gnlab green check ...
    gnlab evolve run|boundary ...
    gnlab selftest [--corrupt A]

Every command accepts --out-dir (default ./out) and --config FILE, a flat
`key = value` file whose entries act as defaults for the command line.
Exit codes: 0 ok, 2 invalid configuration, 3 numerical failure.
"""
import argparse
import csv
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict

import numpy as np

from . import __version__
from .model import make_power_model, MAT
from .solitary_wave import solve_wave, decay_check, decay_rate, WaveError
from .linearization import (potentials, free_potentials, decay_fit, kernel_vectors,
                            two_omega_vectors, apply_JL, norm, make_projector, free_eigenstructure,
                            free_residual, JordanError, ProjectorError)
from .jost import JostError, jost_solve, ode_residual
from .evans import (EvansError, scan_segment, locate_zero, parity_classify_zero, track_curve,
                    evans_eval, LostZero)
from .resolvent import (ResolventError, gamma_matrix, gamma_residual, eq_inverse_check,
                        delta_matrix, green_eval, free_green, delta_residual)
from .evolution import (EvolutionError, RunConfig, evolve_run, boundary_scaling_experiment, Grid,
                        init_state, step, charge, parity_error, Propagator)
from .parallel import pmap, n_workers

NUMERIC = (WaveError, JostError, EvansError, ResolventError, EvolutionError, JordanError,
           ProjectorError, FloatingPointError, np.linalg.LinAlgError)


class ConfigError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    pass


# ------------------------------------------------------------ artifacts

def fmt(v):
    """Shortest round-trip text for numbers."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def config_hash(command, params):
    blob = json.dumps({"command": command, "params": params, "version": __version__},
                      sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (complex, np.complexfloating)):
        return {"re": float(v.real), "im": float(v.imag)}
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, float) and not np.isfinite(v):
        return None
    return v


class Emitter:
    def __init__(self, out_dir, command, params):
        self.dir = out_dir
        self.command = command
        self.params = params
        self.hash = config_hash(command, params)
        os.makedirs(out_dir, exist_ok=True)
        self.files = []

    def csv(self, name, header, rows):
        path = os.path.join(self.dir, name)
        with open(path, "w", newline="") as fh:
            fh.write(f"# config_hash={self.hash}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([fmt(v) for v in r])
        self.files.append(name)
        return path

    def json(self, name, payload, tolerances=None):
        path = os.path.join(self.dir, name)
        doc = {"command": self.command, "version": __version__, "config_hash": self.hash,
               "params": self.params, "tolerances": tolerances or {}, "result": payload}
        with open(path, "w") as fh:
            json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
            fh.write("\n")
        self.files.append(name)
        return path


# ---------------------------------------------------------- validation

def _omega(w):
    if not 0.0 < w < 1.0:
        raise ConfigError(f"omega must lie in (0,1), got {w}")
    return w


def _model(k):
    try:
        return make_power_model(k)
    except ValueError as exc:
        raise ConfigError(str(exc))


def _omega_list(text):
    """'0.05:0.95:0.05' (inclusive) or '0.1,0.2'."""
    if ":" in text:
        a, b, s = (float(t) for t in text.split(":"))
        if s <= 0:
            raise ConfigError("omega step must be positive")
        n = int(np.floor((b - a) / s + 1e-9))
        ws = [round(a + i * s, 12) for i in range(n + 1)]
    else:
        ws = [float(t) for t in text.split(",") if t.strip()]
    if not ws:
        raise ConfigError("empty omega list")
    return [_omega(w) for w in ws]


def _float_list(text):
    return [float(t) for t in text.split(",") if t.strip()]


# -------------------------------------------------------------- commands

def cmd_wave(a, em):
    model = _model(a.k)
    w = _omega(a.omega)
    wave = solve_wave(model, w, x_max=a.xmax, n=a.n)
    x, v, u = wave.full_line()
    em.csv("wave.csv", ["x", "v", "u"], zip(x, v, u))
    H = float(np.abs(wave.first_integral()).max())
    rate = decay_check(wave)
    res = {"Gamma": wave.Gamma, "Q": wave.Q, "E": wave.En, "dQdomega": wave.dQdomega,
           "x_max": wave.x_max, "first_integral_max": H, "ode_residual": wave.ode_residual(),
           "decay_rate": rate, "delta": decay_rate(w)}
    em.json("wave.json", res, {"first_integral": 1e-10})
    return f"wave k={a.k} omega={w} Q={fmt(wave.Q)} dQ/domega={fmt(wave.dQdomega)}"


def _pot(k, w, corrupt=0.0):
    return potentials(solve_wave(_model(k), _omega(w), derivatives=False), corrupt=corrupt)


def cmd_evans_scan(a, em):
    if a.n < 100:
        raise ConfigError("n must be >= 100")
    if a.to <= a.from_:
        raise ConfigError("empty scan range")
    pot = _pot(a.k, a.omega)
    S, br = scan_segment(pot, a.axis, a.from_, a.to, a.n, a.parity)
    rows = [(a.omega, s.lam.real, s.lam.imag, abs(s.E), np.real(s.E), np.imag(s.E),
             abs(s.E_X), abs(s.E_Xperp), s.drift) for s in S]
    em.csv("evans_scan.csv", ["omega", "re_lambda", "im_lambda", "abs_E", "re_E", "im_E",
                              "abs_EX", "abs_EXperp", "drift"], rows)
    brs = [{"lambda": b.lam, "parity": b.parity, "winding": b.winding, "radius": b.radius,
            "scaled_abs": b.value} for b in br]
    failed = sum(not s.ok for s in S)
    em.json("evans_scan.json", {"brackets": brs, "failed_samples": failed})
    txt = ", ".join(f"{b.lam.real:+.6f}{b.lam.imag:+.6f}i(w={b.winding})" for b in br)
    return f"evans scan {a.axis} parity={a.parity}: {len(br)} bracket(s) {txt}"


def cmd_evans_locate(a, em):
    pot = _pot(a.k, a.omega)
    lam = complex(a.re, a.im)
    z = locate_zero(pot, lam, a.parity)
    try:
        par = parity_classify_zero(pot, z.lam)
    except EvansError as exc:
        par = f"unclassified ({exc})"
    res = {"lambda": z.lam, "multiplicity": z.multiplicity, "radius": z.radius,
           "residual": z.residual, "iterations": z.iterations, "parity_class": par}
    em.json("zeros.json", [res])
    if z.multiplicity < 1:
        raise NumericalFailure("zero not certified by winding")
    return f"zero at {z.lam.real:+.10f}{z.lam.imag:+.10f}i multiplicity={z.multiplicity} parity={par}"


def cmd_evans_track(a, em):
    model = _model(a.k)
    _omega(a.from_)
    _omega(a.to)
    if a.step <= 0:
        raise ConfigError("step must be positive")
    try:
        c = track_curve(model, a.from_, a.to, a.step, complex(a.seed_re, a.seed_im), a.parity)
        err = None
    except LostZero as exc:
        c, err = None, exc
    if c is None:
        em.json("curve.json", {"error": str(err), "last_good": err.last_good})
        raise NumericalFailure(str(err))
    rows = [(w, l.real, l.imag, m) for w, l, m in zip(c.omegas, c.lambdas, c.multiplicities)]
    em.csv("curve.csv", ["omega", "re_lambda", "im_lambda", "multiplicity"], rows)
    slope = float(np.polyfit(c.omegas, [l.imag for l in c.lambdas], 1)[0]) if len(rows) > 1 else None
    em.json("curve.json", {"points": len(rows), "reason": c.reason, "slope_im": slope})
    return f"tracked {len(rows)} points, stop={c.reason}, d(Im lambda)/domega={fmt(slope)}"


def _sweep_one(job):
    k, w, parity, n = job
    out = []
    try:
        pot = _pot(k, w)
        segs = [("imaginary", 0.005, 1 + w + 1.5, n), ("real", 0.0008, 0.59, max(100, n // 2))]
        for axis, lo, hi, m in segs:
            _, br = scan_segment(pot, axis, lo, hi, m, parity)
            for b in br:
                try:
                    z = locate_zero(pot, b.lam, parity, on_axis=axis == "imaginary")
                    if z.multiplicity >= 1:
                        out.append((w, z.lam.real, z.lam.imag, z.multiplicity, "ok"))
                    else:
                        out.append((w, b.lam.real, b.lam.imag, b.winding, "uncertified"))
                except EvansError as exc:
                    out.append((w, b.lam.real, b.lam.imag, b.winding, f"locate failed: {exc}"))
    except NUMERIC + (ValueError,) as exc:
        out.append((w, np.nan, np.nan, 0, f"failed: {exc}"))
    return out


def cmd_spectrum_sweep(a, em):
    _model(a.k)
    ws = _omega_list(a.omegas)
    parities = [p.strip() for p in a.parity.split(",")]
    for p in parities:
        if p not in ("full", "X", "Xperp"):
            raise ConfigError(f"unknown parity {p!r}")
    jobs = [(a.k, w, p, a.n) for p in parities for w in ws]
    res = pmap(_sweep_one, jobs, a.workers or n_workers())
    summary = {}
    i = 0
    for p in parities:
        rows = []
        for w in ws:
            got = res[i]
            i += 1
            if not got:
                rows.append((w, None, None, 0, 1 - w, 1 + w, "none"))
            for (ww, re, im, m, st) in got:
                rows.append((ww, re, im, m, 1 - ww, 1 + ww, st))
        em.csv(f"spectrum_{p}.csv", ["omega", "re_lambda", "im_lambda", "multiplicity",
                                     "edge_gap", "edge_embedded", "status"], rows)
        summary[p] = sum(1 for r in rows if r[6] == "ok")
    em.json("spectrum.json", {"zeros_per_parity": summary, "omegas": ws})
    return "spectrum sweep k=%d: " % a.k + ", ".join(f"{p}: {n} zeros" for p, n in summary.items())


def cmd_green_check(a, em):
    pot = _pot(a.k, a.omega)
    lam = complex(a.re, a.im)
    rng = np.random.default_rng(a.seed)
    ys = rng.uniform(-5, 5, 5)
    E = evans_eval(lam, pot=pot).E
    _, dd = delta_matrix(pot, ys, lam)
    det_err = float(np.max(np.abs(np.abs(dd) - abs(E) ** 2)) / abs(E) ** 2)
    xs = np.linspace(-a.half_width, a.half_width, a.npts)
    ge = green_eval(pot, xs, xs, lam, a.side)
    G = ge.G
    refl = green_eval(pot, -xs, -xs, lam, a.side).G
    bb = MAT.bold_beta
    refl_err = float(np.abs(refl - bb @ G @ bb).max() / np.abs(G).max())
    fg = green_eval(free_potentials(pot.wave), xs, xs, lam, a.side).G
    free_err = float(np.abs(fg - free_green(lam, a.omega, xs, xs, a.side)).max()
                     / np.abs(fg).max())
    off, jump = delta_residual(pot, lam, float(ys[0]), a.side)
    gam = ge.gamma
    checks = {"det_delta_vs_E2": (det_err, 1e-8), "det_gamma_plus_1": (abs(np.linalg.det(gam) + 1), 1e-12),
              "reflection": (refl_err, 1e-8), "free_closed_form": (free_err, 1e-8),
              "delta_offdiag": (off, 1e-4), "delta_jump": (jump, 1e-4),
              "eq_inverse": (eq_inverse_check(rng), 1e-10)}
    rows = [(x, y, float(np.abs(G[i, j]).max())) for i, x in enumerate(xs) for j, y in enumerate(xs)]
    em.csv("green.csv", ["x", "y", "abs_G"], rows)
    em.json("green.json", {"lambda": lam, "side": a.side,
                           "checks": {k: {"value": v, "tol": t, "pass": v <= t}
                                      for k, (v, t) in checks.items()}})
    bad = [k for k, (v, t) in checks.items() if not v <= t]
    if bad:
        raise NumericalFailure("green identities failed: " + ", ".join(bad))
    return f"green check lambda={lam}: all {len(checks)} identities within tolerance"


def _run_cfg(a):
    _model(a.k)
    _omega(a.omega0)
    if a.L <= 0 or a.N < 8 or a.N % 2 or a.dt <= 0 or a.T <= 0:
        raise ConfigError("grid/time parameters must be positive (N even)")
    if a.dt > 0.5 * a.L / a.N:
        raise ConfigError("dt must be <= half the grid spacing")
    return RunConfig(k=a.k, omega0=a.omega0, eps=a.eps, L=a.L, N=a.N, dt=a.dt, T=a.T,
                     extract_every=a.extract_every, absorb=a.absorb, width=a.width)


def cmd_evolve_run(a, em):
    cfg = _run_cfg(a)
    r = evolve_run(cfg)
    tr = r.track
    em.csv("evolve.csv", ["t", "omega", "gamma", "Q", "E", "weighted_Z", "H1_Z", "parity_err"],
           tr.rows())
    flagged = sum(f is not None for f in tr.flags)
    em.json("evolve.json", {"run_hash": cfg.digest(), "h1_perturbation": r.h1_perturbation,
                            "final_omega": tr.omega_t[-1], "flagged_extractions": flagged,
                            "Q_drift": abs(tr.Q[-1] - tr.Q[0]) / tr.Q[0],
                            "max_parity_err": max(tr.parity_err)})
    return (f"evolve k={cfg.k} omega0={cfg.omega0} T={cfg.T}: omega(T)={fmt(tr.omega_t[-1])} "
            f"flagged={flagged}")


def cmd_evolve_boundary(a, em):
    Ls = _float_list(a.L_list)
    if not Ls or min(Ls) <= 0:
        raise ConfigError("L list must be positive")
    h = a.h
    base = RunConfig(k=a.k, omega0=_omega(a.omega0), eps=a.eps, L=Ls[0],
                     N=int(round(Ls[0] / h / 2)) * 2, dt=a.dt, T=a.T_max,
                     extract_every=a.extract_every, absorb=False)
    if a.dt > 0.5 * h:
        raise ConfigError("dt must be <= half the grid spacing")
    rows = boundary_scaling_experiment(base, Ls, a.T_max)
    em.csv("boundary.csv", ["L", "onset", "status"], [(r.L, r.onset, r.status) for r in rows])
    on = [r.onset for r in rows]
    mono = all(np.isfinite(on)) and all(b > c for c, b in zip(on, on[1:]))
    em.json("boundary.json", {"rows": [asdict(r) for r in rows], "monotone": mono})
    return "boundary onsets: " + ", ".join(f"L={fmt(r.L)}:{fmt(r.onset)}" for r in rows)


# -------------------------------------------------------------- selftest

def selftest_report(corrupt=0.0):
    """(name, value, tol, passed) for the invariant suite at k=2, omega=0.3.

    Each check runs on its own; a check that raises is reported as failed
    with value nan, so a corrupted potential shows up by name.
    """
    out = []

    def add(name, fn, tol):
        try:
            val = float(fn())
            ok = bool(val <= tol)
        except NUMERIC + (ValueError,):
            val, ok = float("nan"), False
        out.append((name, val, tol, ok))

    B = MAT
    I4 = np.eye(4)
    add("matrix:alpha^2=I", lambda: np.abs(B.bold_alpha @ B.bold_alpha - I4).max(), 1e-15)
    add("matrix:J^2=-I", lambda: np.abs(B.J4 @ B.J4 + I4).max(), 1e-15)
    add("matrix:Sigma_hermitian", lambda: np.abs(B.Sigma - B.Sigma.conj().T).max(), 1e-15)
    add("matrix:beta_J_commute", lambda: np.abs(B.bold_beta @ B.J4 - B.J4 @ B.bold_beta).max(), 1e-15)
    rng = np.random.default_rng(7)
    add("matrix:eq_inverse", lambda: max(eq_inverse_check(rng) for _ in range(5)), 1e-10)
    Bm = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    G = gamma_matrix(Bm)
    add("gamma:det=-1", lambda: abs(np.linalg.det(G) + 1), 1e-12)
    add("gamma:row_condition", lambda: gamma_residual(Bm, G), 1e-12)

    model = make_power_model(2)
    w = 0.3
    wave = solve_wave(model, w)
    add("wave:first_integral", lambda: np.abs(wave.first_integral()).max(), 1e-10)
    add("wave:ode_residual", wave.ode_residual, 1e-6)
    add("wave:decay_rate", lambda: abs(decay_check(wave) - decay_rate(w)) / decay_rate(w), 1e-2)
    add("wave:dQdomega_richardson", lambda: wave.dQ_richardson / abs(wave.dQdomega), 1e-5)

    pot = potentials(wave, corrupt=corrupt)
    target = 2 * model.k * decay_rate(w)
    add("W-decay", lambda: abs(decay_fit(pot)[0] - target) / target, 0.05)

    kb = kernel_vectors(wave, check=False)
    r = kb.residuals
    add("kernel:JL_Jphi", lambda: r["JL_Jphi"], 1e-7)
    add("kernel:JL_dxphi", lambda: r["JL_dxphi"], 1e-7)
    add("jordan:JL_domphi", lambda: r["JL_domphi"], 1e-5)
    add("jordan:JL_jordan2", lambda: r["JL_jordan2"], 1e-5)
    vp, vm = two_omega_vectors(wave)
    nv = norm(wave, vp)
    add("eigen:+2omega_i", lambda: norm(wave, apply_JL(wave, vp, pot) - 2j * w * vp) / nv, 1e-6)
    add("eigen:-2omega_i", lambda: norm(wave, apply_JL(wave, vm, pot) + 2j * w * vm) / nv, 1e-6)
    P = make_projector(wave, kb)
    psi = np.cos(kb.x)[:, None] * np.exp(-kb.x[:, None] ** 2 / 8) * np.array([1.0, 0.3, -0.2, 0.5])
    add("projector:idempotent",
        lambda: norm(wave, P.pd(P.pd(psi)) - P.pd(psi)) / norm(wave, psi), 1e-10)

    add("jost:free_residual", lambda: free_residual(free_eigenstructure(0.5j, w)), 1e-12)
    add("jost:ode_residual", lambda: ode_residual(
        jost_solve(0.4j, w, pot, "plus", 1, "f", x=np.linspace(0, 5, 1001)), pot), 1e-6)

    add("evans:E(0)", lambda: abs(evans_eval(0.0, pot=pot).E), 1e-8)
    add("evans:E(2omega_i)", lambda: abs(evans_eval(0.6j, pot=pot).E), 1e-6)
    add("evans:|E(50i)|-1", lambda: abs(abs(evans_eval(50j, pot=pot).E) - 1), 0.05)

    def _sr():
        return evans_eval(0.3 + 0.9j, pot=pot)
    add("evans:drift", lambda: _sr().drift, 1e-6)
    add("evans:factorization",
        lambda: (lambda s: abs(abs(s.E) - 4 * abs(s.E_X) * abs(s.E_Xperp)) / abs(s.E))(_sr()), 1e-6)

    lam = 0.3j
    ys = np.array([-2.0, 0.5, 3.0])

    def _det():
        E = evans_eval(lam, pot=pot).E
        dd = delta_matrix(pot, ys, lam)[1]
        return np.abs(np.abs(dd) - abs(E) ** 2).max() / abs(E) ** 2
    add("resolvent:det_delta", _det, 1e-8)
    add("resolvent:delta_offdiag", lambda: delta_residual(pot, lam, 0.7)[0], 1e-4)
    add("resolvent:delta_jump", lambda: delta_residual(pot, lam, 0.7)[1], 1e-4)
    xs = np.linspace(-4, 4, 17)

    def _free():
        fg = green_eval(free_potentials(wave), xs, xs, lam).G
        return np.abs(fg - free_green(lam, w, xs, xs)).max() / np.abs(fg).max()
    add("resolvent:free_closed_form", _free, 1e-8)

    grid = Grid(100.0, 1024)
    st, _ = init_state(wave, [], grid, 0.02)
    Q0 = charge(st.psi, grid)
    step(st, nsteps=1000, sym_every=0)
    add("evolution:charge", lambda: abs(charge(st.psi, grid) - Q0) / Q0, 1e-11)
    # no symmetrization: only round-off may break the reflection symmetry
    add("evolution:parity", lambda: parity_error(st.psi, grid), 1e-10)
    kk = grid.k[3]
    ev, V = np.linalg.eigh(np.array([[1, 1j * kk], [-1j * kk, -1]]))
    pw = np.exp(1j * kk * grid.x)[:, None] * V[:, 1][None, :]
    prop = Propagator(grid, 0.5)

    def _plane():
        z = pw
        for _ in range(20):
            z = prop(z)
        return np.abs(z - np.exp(-1j * ev[1] * 10) * pw).max()
    add("evolution:free_exact", _plane, 1e-12)
    return out


def cmd_selftest(a, em):
    t0 = time.time()
    rep = selftest_report(a.corrupt)
    body = [(n, fmt(v), fmt(t), ok) for n, v, t, ok in rep]
    h = hashlib.sha256(json.dumps(body).encode()).hexdigest()
    em.csv("selftest.csv", ["invariant", "value", "tol", "pass"], [(n, v, t, ok) for n, v, t, ok in rep])
    em.json("selftest.json", {"report_hash": h, "passed": all(r[3] for r in rep),
                              "invariants": [{"name": n, "value": v, "tol": t, "pass": ok}
                                             for n, v, t, ok in rep]})
    bad = [n for n, _, _, ok in rep if not ok]
    if bad:
        raise NumericalFailure("failed invariants: " + ", ".join(bad))
    return f"selftest: {len(rep)} invariants passed in {time.time() - t0:.0f} s, report {h[:12]}"


# ---------------------------------------------------------------- parser

def _common(p):
    p.add_argument("--out-dir", default="./out")
    p.add_argument("--config", default=None)
    p.add_argument("--workers", type=int, default=None)


def build_parser():
    ap = argparse.ArgumentParser(prog="gnlab", description="Gross-Neveu solitary wave laboratory")
    ap.add_argument("--version", action="version", version=f"gnlab {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("wave", help="construct a solitary wave")
    _common(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--omega", type=float, required=True)
    p.add_argument("--xmax", type=float, default=None)
    p.add_argument("--n", type=int, default=8192)
    p.set_defaults(func=cmd_wave)

    ev = sub.add_parser("evans", help="Evans function tools").add_subparsers(dest="sub", required=True)
    p = ev.add_parser("scan")
    _common(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--omega", type=float, required=True)
    p.add_argument("--axis", choices=["imag", "imaginary", "real"], default="imag")
    p.add_argument("--from", dest="from_", type=float, default=0.0)
    p.add_argument("--to", type=float, default=1.0)
    p.add_argument("--n", type=int, default=600)
    p.add_argument("--parity", choices=["full", "X", "Xperp"], default="full")
    p.set_defaults(func=cmd_evans_scan)
    p = ev.add_parser("locate")
    _common(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--omega", type=float, required=True)
    p.add_argument("--re", type=float, default=0.0)
    p.add_argument("--im", type=float, default=0.0)
    p.add_argument("--parity", choices=["full", "X", "Xperp"], default="full")
    p.set_defaults(func=cmd_evans_locate)
    p = ev.add_parser("track")
    _common(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--from", dest="from_", type=float, required=True)
    p.add_argument("--to", type=float, required=True)
    p.add_argument("--step", type=float, default=0.025)
    p.add_argument("--seed-re", type=float, default=0.0)
    p.add_argument("--seed-im", type=float, required=True)
    p.add_argument("--parity", choices=["full", "X", "Xperp"], default="full")
    p.set_defaults(func=cmd_evans_track)

    sp = sub.add_parser("spectrum").add_subparsers(dest="sub", required=True)
    p = sp.add_parser("sweep")
    _common(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--omegas", default="0.05:0.95:0.05")
    p.add_argument("--parity", default="X,Xperp")
    p.add_argument("--n", type=int, default=600)
    p.set_defaults(func=cmd_spectrum_sweep)

    gp = sub.add_parser("green").add_subparsers(dest="sub", required=True)
    p = gp.add_parser("check")
    _common(p)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--omega", type=float, default=0.3)
    p.add_argument("--re", type=float, default=0.0)
    p.add_argument("--im", type=float, default=0.3)
    p.add_argument("--side", choices=["minus", "plus"], default="minus")
    p.add_argument("--half-width", type=float, default=5.0)
    p.add_argument("--npts", type=int, default=41)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_green_check)

    vp = sub.add_parser("evolve").add_subparsers(dest="sub", required=True)
    p = vp.add_parser("run")
    _common(p)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--omega0", type=float, default=0.3)
    p.add_argument("--eps", type=float, default=1e-2)
    p.add_argument("--L", type=float, default=200.0)
    p.add_argument("--N", type=int, default=2048)
    p.add_argument("--dt", type=float, default=0.02)
    p.add_argument("--T", type=float, default=200.0)
    p.add_argument("--extract-every", type=float, default=0.5)
    p.add_argument("--width", type=float, default=2.0)
    p.add_argument("--absorb", action="store_true")
    p.set_defaults(func=cmd_evolve_run)
    p = vp.add_parser("boundary")
    _common(p)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--omega0", type=float, default=0.3)
    p.add_argument("--eps", type=float, default=1e-2)
    p.add_argument("--L-list", default="100,200,400")
    p.add_argument("--h", type=float, default=0.25)
    p.add_argument("--dt", type=float, default=0.12)
    p.add_argument("--T-max", type=float, default=3000.0)
    p.add_argument("--extract-every", type=float, default=1.0)
    p.set_defaults(func=cmd_evolve_boundary)

    p = sub.add_parser("selftest")
    _common(p)
    p.add_argument("--corrupt", type=float, default=0.0,
                   help="fault injection: add a non-decaying bump of this size to W")
    p.set_defaults(func=cmd_selftest)
    return ap


def read_config(path):
    """Flat `key = value` lines; '#' starts a comment."""
    items = []
    with open(path) as fh:
        for no, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{no}: expected key = value")
            k, v = (t.strip() for t in line.split("=", 1))
            items.append((k.replace("_", "-"), v))
    return items


def _config_argv(items):
    out = []
    for k, v in items:
        if v.lower() in ("true", "yes", "on"):
            out.append(f"--{k}")
        elif v.lower() in ("false", "no", "off"):
            continue
        else:
            out.extend([f"--{k}", v])
    return out


def _split_command(argv):
    """Leading command words (wave / evans scan / ...) and the option tail."""
    n = 0
    while n < len(argv) and not argv[n].startswith("-") and n < 2:
        n += 1
    return argv[:n], argv[n:]


def run_command(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        if "--config" in argv:
            i = argv.index("--config")
            if i + 1 >= len(argv):
                raise ConfigError("--config needs a file")
            head, tail = _split_command(argv)
            argv = head + _config_argv(read_config(argv[i + 1])) + tail
        a = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 2
    except (ConfigError, OSError) as exc:
        print(f"gnlab: invalid configuration: {exc}", file=sys.stderr)
        return 2
    params = {k: v for k, v in vars(a).items() if k not in ("func", "out_dir", "config", "workers")}
    command = " ".join(t for t in (a.cmd, getattr(a, "sub", None)) if t)
    em = Emitter(a.out_dir, command, params)
    try:
        msg = a.func(a, em)
    except ConfigError as exc:
        print(f"gnlab: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except (NumericalFailure,) + NUMERIC as exc:
        print(f"gnlab: numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"gnlab: invalid configuration: {exc}", file=sys.stderr)
        return 2
    print(f"{msg} [config {em.hash[:12]}]")
    return 0


def main():
    sys.exit(run_command())
