"""Time evolution of i psi_t = D psi - f(psi* beta psi) beta psi on a periodic box.

D = -i alpha d/dx + beta has Fourier symbol [[1, ik], [-ik, -1]] with
eigenvalues +-mu, mu = sqrt(1 + k^2), so the free step is exact:
    exp(-i D dt) = cos(mu dt) - i sin(mu dt) D / mu.
The nonlinear flow keeps s = |psi1|^2 - |psi2|^2 fixed and is a pointwise
phase rotation.  Strang splitting of the two is second order and unitary.

Real 4-vector form: (Re psi1, Re psi2, Im psi1, Im psi2); J represents -i.
"""
from dataclasses import dataclass, field, asdict
import hashlib
import json

import numpy as np
from numpy.polynomial import chebyshev as C

from .model import make_power_model
from .linearization import J4, BB
from .solitary_wave import solve_wave

EXTRACT_TOL = 1e-12


class EvolutionError(RuntimeError):
    pass


class TubeError(EvolutionError):
    pass


# ------------------------------------------------------------------- grid

@dataclass
class Grid:
    L: float
    N: int

    def __post_init__(self):
        if self.N < 8 or self.N % 2:
            raise ValueError("N must be even and >= 8")
        self.h = self.L / self.N
        self.x = -self.L / 2 + self.h * np.arange(self.N)
        self.k = 2 * np.pi * np.fft.fftfreq(self.N, self.h)
        # index of -x modulo the period
        self.mirror = (-np.arange(self.N)) % self.N


def to_real(psi):
    return np.concatenate([psi.real, psi.imag], axis=1)


def to_complex(R):
    return R[:, :2] + 1j * R[:, 2:]


def ip(grid, a, b):
    """Real L2 pairing of real 4-vector fields."""
    return float(np.sum(a * b) * grid.h)


def parity_error(psi, grid):
    """Distance from X (psi1 even, psi2 odd), relative to max |psi|."""
    m = grid.mirror
    scale = max(np.abs(psi).max(), 1e-300)
    e1 = np.abs(psi[:, 0] - psi[m, 0]).max()
    e2 = np.abs(psi[:, 1] + psi[m, 1]).max()
    return float(max(e1, e2) / scale)


def symmetrize(psi, grid):
    m = grid.mirror
    out = np.empty_like(psi)
    out[:, 0] = 0.5 * (psi[:, 0] + psi[m, 0])
    out[:, 1] = 0.5 * (psi[:, 1] - psi[m, 1])
    return out


def spectral_dx(a, grid):
    return np.fft.ifft(1j * grid.k[:, None] * np.fft.fft(a, axis=0), axis=0)


def h1_norm(psi, grid):
    d = spectral_dx(psi, grid)
    return float(np.sqrt(grid.h * (np.sum(np.abs(psi) ** 2) + np.sum(np.abs(d) ** 2))))


def weighted_norm(psi, grid, s=3.0):
    w = (1 + grid.x ** 2) ** (-s / 2)
    return float(np.sqrt(grid.h * np.sum(w[:, None] ** 2 * np.abs(psi) ** 2)))


# ------------------------------------------------------------------ state

@dataclass
class EvolutionState:
    psi: np.ndarray          # (N, 2) complex
    t: float
    dt: float
    grid: Grid
    model: object
    steps: int = 0
    history: list = field(default_factory=list)


@dataclass
class Perturbation:
    component: int = 1       # 1 or 2
    amplitude: complex = 1e-2
    width: float = 2.0
    shape: str = "even"      # even: gaussian, odd: x * gaussian
    center: float = 0.0


def perturbation_field(grid, perts):
    rho = np.zeros((grid.N, 2), complex)
    for p in perts:
        y = (grid.x - p.center) / p.width
        g = np.exp(-y ** 2)
        if p.shape == "odd":
            g = y * g
        elif p.shape != "even":
            raise ValueError(f"unknown shape {p.shape!r}")
        rho[:, p.component - 1] += p.amplitude * g
    return rho


def wave_on_grid(wave, grid):
    v, u = wave.profile(grid.x)
    psi = np.zeros((grid.N, 2), complex)
    psi[:, 0] = v
    psi[:, 1] = u
    # the point -L/2 is its own mirror; u is odd so it must vanish there
    psi[0, 1] = 0.0
    return psi


def init_state(wave, perts, grid, dt, tol=1e-12):
    """psi0 = phi + rho; returns the state and the H1 size of rho."""
    rho = perturbation_field(grid, perts or [])
    if np.abs(rho).max() > 0 and parity_error(rho, grid) > tol:
        raise EvolutionError("parity violation")
    psi = wave_on_grid(wave, grid) + rho
    if dt > 0.5 * grid.h:
        raise EvolutionError("dt must be <= half the grid spacing")
    return EvolutionState(psi=psi, t=0.0, dt=dt, grid=grid, model=wave.model), h1_norm(rho, grid)


def charge(psi, grid):
    return float(grid.h * np.sum(np.abs(psi) ** 2))


def energy(psi, model, grid):
    ph = np.fft.fft(psi, axis=0)
    k = grid.k
    Dp = np.empty_like(ph)
    Dp[:, 0] = ph[:, 0] + 1j * k * ph[:, 1]
    Dp[:, 1] = -1j * k * ph[:, 0] - ph[:, 1]
    kin = np.real(np.sum(np.conj(ph) * Dp)) / grid.N * grid.h
    s = np.abs(psi[:, 0]) ** 2 - np.abs(psi[:, 1]) ** 2
    return float(kin - grid.h * np.sum(model.F(s)))


# ------------------------------------------------------------- stepping

class Propagator:
    """Exact free Dirac step for a fixed (grid, dt)."""

    def __init__(self, grid, dt):
        k = grid.k
        mu = np.sqrt(1 + k ** 2)
        c, sn = np.cos(mu * dt), np.sin(mu * dt) / mu
        self.U = np.empty((grid.N, 2, 2), complex)
        self.U[:, 0, 0] = c - 1j * sn
        self.U[:, 0, 1] = sn * k          # -i sn (i k)
        self.U[:, 1, 0] = -sn * k         # -i sn (-i k)
        self.U[:, 1, 1] = c + 1j * sn

    def __call__(self, psi):
        ph = np.fft.fft(psi, axis=0)
        ph = np.einsum("nab,nb->na", self.U, ph)
        return np.fft.ifft(ph, axis=0)


def nonlinear_flow(psi, model, tau):
    s = np.abs(psi[:, 0]) ** 2 - np.abs(psi[:, 1]) ** 2
    ph = np.exp(1j * model.f(s) * tau)
    out = np.empty_like(psi)
    out[:, 0] = psi[:, 0] * ph
    out[:, 1] = psi[:, 1] / ph
    return out


def absorbing_mask(grid, dt, strength=1.0, frac=0.1):
    """exp(-strength dt r^2) on the outer frac of the box (r: 0 -> 1 there)."""
    a = grid.L / 2 * (1 - frac)
    r = np.clip((np.abs(grid.x) - a) / (grid.L / 2 - a), 0, None)
    return np.exp(-strength * dt * r ** 2)


_PROPS = {}


def _prop(grid, dt):
    key = (grid.L, grid.N, dt)
    if key not in _PROPS:
        _PROPS.clear()
        _PROPS[key] = Propagator(grid, dt)
    return _PROPS[key]


def step(state, dt=None, nsteps=1, mask=None, sym_every=100):
    """Strang steps in place; symmetrizes parity every sym_every steps."""
    dt = state.dt if dt is None else dt
    P = _prop(state.grid, dt)
    psi = state.psi
    m = state.model
    for _ in range(nsteps):
        psi = nonlinear_flow(psi, m, dt / 2)
        psi = P(psi)
        psi = nonlinear_flow(psi, m, dt / 2)
        if mask is not None:
            psi = psi * mask[:, None]
        state.steps += 1
        if sym_every and state.steps % sym_every == 0:
            psi = symmetrize(psi, state.grid)
    if not np.all(np.isfinite(psi)):
        raise EvolutionError("overflow")
    state.psi = psi
    state.t += nsteps * dt
    return state


# ------------------------------------------------------------ modulation

class WaveFamily:
    """phi_omega on a grid for omega near omega0, Chebyshev in omega."""

    def __init__(self, model, omega0, grid, half_width=0.06, nodes=18):
        a = max(omega0 - half_width, 1e-3)
        b = min(omega0 + half_width, 1 - 1e-3)
        self.a, self.b, self.omega0, self.grid = a, b, omega0, grid
        t = np.cos(np.pi * (np.arange(nodes) + 0.5) / nodes)
        ws = 0.5 * (a + b) + 0.5 * (b - a) * t
        Y = []
        for w in ws:
            wv = solve_wave(model, float(w), derivatives=False)
            v, u = wv.profile(grid.x)
            u = u.copy()
            u[0] = 0.0
            Y.append(np.concatenate([v, u]))
        self.coef = C.chebfit(t, np.array(Y), nodes - 1)
        sc = 2 / (b - a)
        self.d1 = C.chebder(self.coef, 1, scl=sc)
        self.d2 = C.chebder(self.coef, 2, scl=sc)

    def _t(self, omega):
        if not (self.a <= omega <= self.b):
            raise TubeError(f"omega {omega} outside the wave family")
        return (2 * omega - self.a - self.b) / (self.b - self.a)

    def _vec(self, c, omega):
        y = C.chebval(self._t(omega), c)
        N = self.grid.N
        out = np.zeros((N, 4))
        out[:, 0] = y[:N]
        out[:, 1] = y[N:]
        return out

    def phi(self, omega):
        return self._vec(self.coef, omega)

    def dphi(self, omega):
        return self._vec(self.d1, omega)

    def d2phi(self, omega):
        return self._vec(self.d2, omega)


@dataclass
class Extraction:
    omega: float
    theta: float
    R: np.ndarray
    Z: np.ndarray
    residuals: tuple
    iterations: int


def _residual(fam, Psi, omega, theta):
    ph = fam.phi(omega)
    R = to_real(np.exp(1j * theta) * Psi) - ph
    return ph, R


def project_c(fam, R, omega=None):
    """P_c(omega) R, with P_d built from J phi and d_omega phi."""
    g = fam.grid
    w = fam.omega0 if omega is None else omega
    ph, dph = fam.phi(w), fam.dphi(w)
    p = ip(g, ph, dph)
    a = ip(g, ph, R) / p
    b = ip(g, dph @ J4.T, R) / p
    return R - a * dph - b * (ph @ J4.T)


def modulation_extract(state, fam, guess, tol=EXTRACT_TOL, maxit=20):
    """Newton for (omega, theta) with <phi, R> = <J d_omega phi, R> = 0."""
    g = fam.grid
    Psi = state.psi
    w, th = float(guess[0]), float(guess[1])
    for it in range(1, maxit + 1):
        ph, R = _residual(fam, Psi, w, th)
        dph = fam.dphi(w)
        Jd = dph @ J4.T
        F = np.array([ip(g, ph, R), ip(g, Jd, R)])
        A = np.array([[ip(g, dph, R) - ip(g, ph, dph), -ip(g, ph, R @ J4.T)],
                      [ip(g, fam.d2phi(w) @ J4.T, R), -ip(g, dph, R + ph)]])
        try:
            d = np.linalg.solve(A, -F)
        except np.linalg.LinAlgError:
            raise TubeError("left soliton tube")
        w, th = w + d[0], th + d[1]
        if abs(d[0]) + abs(d[1]) < tol:
            break
    else:
        raise TubeError("left soliton tube")
    ph, R = _residual(fam, Psi, w, th)
    nR = np.sqrt(ip(g, R, R))
    res = (abs(ip(g, ph, R)), abs(ip(g, fam.dphi(w) @ J4.T, R)))
    if nR > 0 and max(res) > 1e-6 * nR and max(res) > 1e-13:
        raise TubeError("left soliton tube")
    return Extraction(omega=float(w), theta=float(th), R=R, Z=project_c(fam, R), residuals=res,
                      iterations=it)


def _nl(model, U):
    """Real form of -f(s) beta u."""
    s = U[:, 0] ** 2 + U[:, 2] ** 2 - U[:, 1] ** 2 - U[:, 3] ** 2
    return -model.f(s)[:, None] * (U @ BB.T)


def n1_term(model, ph, R):
    """Nonlinearity minus its linearization at phi."""
    s = ph[:, 0] ** 2 - ph[:, 1] ** 2
    Bph = ph @ BB.T
    BR = R @ BB.T
    lin = -model.f(s)[:, None] * BR - 2 * (model.fprime(s) * np.sum(ph * BR, axis=1))[:, None] * Bph
    return _nl(model, ph + R) - _nl(model, ph) - lin


def modulation_rhs(state, fam, omega, theta, cond_max=1e8):
    """(omega_dot, gamma_dot) from the time derivative of the orthogonality conditions."""
    g = fam.grid
    ph, R = _residual(fam, state.psi, omega, theta)
    dph = fam.dphi(omega)
    p = ip(g, ph, dph)
    A = np.array([[p - ip(g, dph, R), ip(g, ph, R @ J4.T)],
                  [-ip(g, fam.d2phi(omega) @ J4.T, R), p + ip(g, dph, R)]])
    if np.linalg.cond(A) > cond_max:
        raise EvolutionError("modulation matrix degenerate")
    N1 = n1_term(state.model, ph, R)
    rhs = np.array([ip(g, ph, N1 @ J4.T), ip(g, dph, N1)])
    wd, gd = np.linalg.solve(A, rhs)
    return float(wd), float(gd), A


# ------------------------------------------------------------------- runs

@dataclass
class RunConfig:
    k: int = 2
    omega0: float = 0.3
    eps: float = 0.0
    L: float = 200.0
    N: int = 2048
    dt: float = 0.02
    T: float = 10.0
    extract_every: float = 0.5
    absorb: bool = False
    absorb_strength: float = 2.0
    width: float = 2.0
    sym_every: int = 100

    def digest(self):
        blob = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class ModulationTrack:
    times: list = field(default_factory=list)
    omega_t: list = field(default_factory=list)
    gamma_t: list = field(default_factory=list)
    theta_t: list = field(default_factory=list)
    Z_weighted: list = field(default_factory=list)
    Z_H1: list = field(default_factory=list)
    Z_L2: list = field(default_factory=list)
    Q: list = field(default_factory=list)
    E: list = field(default_factory=list)
    parity_err: list = field(default_factory=list)
    orth: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    omega_int: float = 0.0

    def rows(self):
        return list(zip(self.times, self.omega_t, self.gamma_t, self.Q, self.E, self.Z_weighted,
                        self.Z_H1, self.parity_err))


@dataclass
class RunResult:
    config: RunConfig
    track: ModulationTrack
    state: EvolutionState
    h1_perturbation: float


def default_perturbation(eps, width=2.0):
    return [Perturbation(component=1, amplitude=eps, width=width, shape="even")] if eps else []


def evolve_run(cfg, perts=None, family=None, stop=None):
    """Evolve to cfg.T, extracting (omega, gamma, Z) every cfg.extract_every."""
    model = make_power_model(cfg.k)
    grid = Grid(cfg.L, cfg.N)
    wave = solve_wave(model, cfg.omega0, derivatives=False)
    if perts is None:
        perts = default_perturbation(cfg.eps, cfg.width)
    state, h1 = init_state(wave, perts, grid, cfg.dt)
    fam = family or WaveFamily(model, cfg.omega0, grid)
    mask = absorbing_mask(grid, cfg.dt, cfg.absorb_strength) if cfg.absorb else None
    per = max(1, int(round(cfg.extract_every / cfg.dt)))
    nsteps = int(round(cfg.T / cfg.dt))
    tr = ModulationTrack()
    guess = (cfg.omega0, 0.0)
    done = 0
    while True:
        _record(tr, state, fam, guess)
        if tr.flags[-1] is None:
            w, th = tr.omega_t[-1], tr.theta_t[-1]
            guess = (w, th + w * per * cfg.dt)
        else:
            guess = (guess[0], guess[1] + guess[0] * per * cfg.dt)
        if stop is not None and stop(tr):
            break
        if done >= nsteps:
            break
        n = min(per, nsteps - done)
        step(state, nsteps=n, mask=mask, sym_every=cfg.sym_every)
        done += n
    return RunResult(config=cfg, track=tr, state=state, h1_perturbation=h1)


def _record(tr, state, fam, guess):
    g = state.grid
    tr.times.append(state.t)
    tr.Q.append(charge(state.psi, g))
    tr.E.append(energy(state.psi, state.model, g))
    tr.parity_err.append(parity_error(state.psi, g))
    try:
        ex = modulation_extract(state, fam, guess)
        w, th, Z = ex.omega, ex.theta, ex.Z
        tr.orth.append(max(ex.residuals))
        tr.flags.append(None)
    except EvolutionError as exc:
        # outside the tube: keep the last parameters, Z from the raw residual
        w, th = guess
        try:
            ph, R = _residual(fam, state.psi, fam.omega0, th)
        except TubeError:
            R = to_real(state.psi)
        Z = R
        tr.orth.append(np.nan)
        tr.flags.append(str(exc))
    # gamma = theta - int_0^t omega, trapezoid over the extraction times
    if tr.omega_t:
        tr.omega_int += 0.5 * (tr.times[-1] - tr.times[-2]) * (tr.omega_t[-1] + w)
    tr.omega_t.append(float(w))
    tr.theta_t.append(float(th))
    tr.gamma_t.append(float(th - tr.omega_int))
    Zc = to_complex(Z)
    tr.Z_weighted.append(weighted_norm(Zc, g))
    tr.Z_H1.append(h1_norm(Zc, g))
    tr.Z_L2.append(float(np.sqrt(ip(g, Z, Z))))


# ------------------------------------------------------- order / artifacts

def richardson_ratio(cfg, T=None):
    """|u(dt) - u(dt/2)| / |u(dt/2) - u(dt/4)| at a fixed time; 4 for a second-order scheme.

    Returns the two differences and their ratio.
    """
    T = cfg.T if T is None else T
    model = make_power_model(cfg.k)
    grid = Grid(cfg.L, cfg.N)
    wave = solve_wave(model, cfg.omega0, derivatives=False)
    finals = []
    for div in (1, 2, 4):
        st, _ = init_state(wave, default_perturbation(cfg.eps, cfg.width), grid, cfg.dt / div)
        step(st, nsteps=int(round(T * div / cfg.dt)), sym_every=cfg.sym_every)
        finals.append(st.psi)
    e1 = np.sqrt(grid.h * np.sum(np.abs(finals[0] - finals[1]) ** 2))
    e2 = np.sqrt(grid.h * np.sum(np.abs(finals[1] - finals[2]) ** 2))
    return float(e1), float(e2), float(e1 / e2)


@dataclass
class OnsetRow:
    L: float
    onset: float
    status: str


def artifact_onset(tr, baseline_until=10.0, factor=5.0):
    t = np.array(tr.times)
    z = np.array(tr.Z_H1)
    base = z[t < baseline_until].max()
    hit = np.nonzero((t >= baseline_until) & (z > factor * base))[0]
    return float(t[hit[0]]) if len(hit) else None


def boundary_scaling_experiment(base, L_list, T_max=None, baseline_until=10.0, factor=5.0):
    """Artifact onset time against box length at fixed grid spacing.

    No absorbing layer here: the artifact needs the wrap-around.
    """
    rows = []
    h = base.L / base.N
    for L in L_list:
        N = int(round(L / h / 2)) * 2
        cfg = RunConfig(**{**asdict(base), "L": float(L), "N": N, "absorb": False,
                           "T": base.T if T_max is None else T_max})

        def stop(tr):
            return artifact_onset(tr, baseline_until, factor) is not None

        res = evolve_run(cfg, stop=stop)
        on = artifact_onset(res.track, baseline_until, factor)
        rows.append(OnsetRow(L=float(L), onset=on if on is not None else float("nan"),
                             status="onset" if on is not None else "no artifact observed"))
    return rows
