"""Standing waves phi(x) e^{-i omega t}, phi = (v, u), v even and positive, u odd.

Stationary system (m = 1):
    v' = -(1 + omega - f(s)) u,    u' = -(1 - omega - f(s)) v,    s = v^2 - u^2.
H = (F(s) - s)/2 + omega (v^2 + u^2)/2 is conserved, and H = 0 on the wave, so
    v^2 + u^2 = (s - F(s))/omega,    s' = -4 omega u v.
We integrate z = log(Gamma/s) >= 0, which keeps relative accuracy both near
the turning point and in the tail:
    z' = 2 sqrt(g(s)^2 - omega^2),   g(s) = 1 - F(s)/s,
and recover v, u from the level set (u >= 0 for x > 0).
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .model import Model

RTOL = 1e-11
ATOL = 1e-11
H0 = 1e-4           # series step off the degenerate start
DOMEGA = 1e-3       # step for d/domega


class WaveError(RuntimeError):
    pass


def decay_rate(omega):
    return float(np.sqrt(1.0 - omega * omega))


def default_xmax(omega):
    return max(40.0, 30.0 / decay_rate(omega))


def _FoverS(model, s):
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = model.F(s) / s
    return np.where(s == 0, 0.0, r)


def _gm(model, omega, Gamma, z):
    """g(s) - omega at s = Gamma e^{-z}; cancellation free for powers."""
    z = np.asarray(z, dtype=float)
    if model.name.startswith("s^"):
        return -(1.0 - omega) * np.expm1(-model.k * z)
    return (1.0 - omega) - _FoverS(model, Gamma * np.exp(-z))


def turning_point(model, omega, s_cap=1e3, nsample=2000):
    """Smallest positive root of omega*G = G - F(G)."""
    if not 0.0 < omega < 1.0:
        raise ValueError(f"omega must lie in (0,1), got {omega}")

    def h(s):
        return s - model.F(s) - omega * s

    # bracket the first sign change on a geometric grid
    ss = np.geomspace(1e-12, s_cap, nsample)
    hv = h(ss)
    idx = np.nonzero(hv <= 0)[0]
    if len(idx) == 0 or idx[0] == 0:
        raise WaveError("no admissible turning point")
    i = idx[0]
    G = brentq(h, ss[i - 1], ss[i], xtol=1e-15, rtol=1e-15, maxiter=200)
    # strict inequality omega*s < s - F(s) inside (0, G)
    inner = np.linspace(0, G, 1001)[1:-1]
    if np.any(h(inner) <= 0):
        raise WaveError("no admissible turning point")
    if abs(omega - (1 - model.f(G))) < 1e-12:
        raise WaveError("degenerate turning point (omega = 1 - f(Gamma))")
    return float(G)


@dataclass
class _Raw:
    omega: float
    Gamma: float
    x_max: float
    sol: object          # dense output for (z, q, e) on [H0, x_max]
    zpp0: float
    Q: float
    En: float


def _integrate(model, omega, x_max):
    G = turning_point(model, omega)
    fG = float(model.f(G))
    zpp0 = 4.0 * omega * (fG - 1.0 + omega)

    def rhs(x, y):
        s = G * np.exp(-y[0])
        gm = float(_gm(model, omega, G, y[0]))
        d = max(gm * (gm + 2 * omega), 0.0)            # g^2 - omega^2
        p = s * (gm + omega) / omega                   # v^2 + u^2
        return [2.0 * np.sqrt(d), p, s * model.f(s) - model.F(s)]

    z0 = [0.5 * zpp0 * H0 ** 2, G * H0, (G * fG - float(model.F(G))) * H0]
    sol = solve_ivp(rhs, (H0, x_max), z0, method="DOP853", rtol=RTOL, atol=ATOL,
                    dense_output=True)
    if not sol.success:
        raise WaveError(f"integration failure: {sol.message}")
    zend, qend, eend = sol.y[:, -1]
    # exponential tail beyond x_max, density ~ e^{-2 delta x}
    dl = decay_rate(omega)
    s_end = G * np.exp(-zend)
    gm = float(_gm(model, omega, G, zend))
    qend += s_end * (gm + omega) / omega / (2 * dl)
    Q = 2.0 * qend
    En = omega * Q + 2.0 * eend
    return _Raw(omega, G, x_max, sol.sol, zpp0, Q, En)


def _zeta(raw, ax, delta):
    """z = log(Gamma/s) at |x| (array)."""
    ax = np.asarray(ax, dtype=float)
    z = np.empty_like(ax)
    a = ax <= H0
    z[a] = 0.5 * raw.zpp0 * ax[a] ** 2
    b = (~a) & (ax <= raw.x_max)
    if np.any(b):
        z[b] = raw.sol(ax[b])[0]
    c = ax > raw.x_max
    if np.any(c):
        z[c] = raw.sol(raw.x_max)[0] + 2 * delta * (ax[c] - raw.x_max)
    return z


def _vu(model, raw, x):
    omega = raw.omega
    z = _zeta(raw, np.abs(x), decay_rate(omega))
    s = raw.Gamma * np.exp(-z)
    gm = _gm(model, omega, raw.Gamma, z)
    return s, gm


@dataclass
class SolitaryWave:
    model: Model
    omega: float
    Gamma: float
    x: np.ndarray
    v: np.ndarray
    u: np.ndarray
    Q: float
    En: float
    dQdomega: float
    x_max: float
    n: int
    dQ_richardson: float = float("nan")
    _raw: object = field(default=None, repr=False)

    @property
    def delta(self):
        return decay_rate(self.omega)

    def s_at(self, x):
        return _vu(self.model, self._raw, x)[0]

    def profile(self, x):
        """(v, u) at arbitrary real x, parity extended."""
        x = np.asarray(x, dtype=float)
        s, gm = _vu(self.model, self._raw, x)
        v = np.sqrt(s * (gm + 2 * self.omega) / (2 * self.omega))
        u = np.sqrt(np.maximum(s * gm / (2 * self.omega), 0.0)) * np.sign(x)
        return v, u

    def full_line(self):
        """Samples on the symmetric grid [-x_max, x_max] (2n-1 points)."""
        x = np.concatenate([-self.x[:0:-1], self.x])
        v = np.concatenate([self.v[:0:-1], self.v])
        u = np.concatenate([-self.u[:0:-1], self.u])
        return x, v, u

    def first_integral(self):
        s = self.v ** 2 - self.u ** 2
        return 0.5 * (self.model.F(s) - s) + 0.5 * self.omega * (self.v ** 2 + self.u ** 2)

    def ode_residual(self):
        """Sup norm of the stationary equations with spline derivatives."""
        x, v, u = self.full_line()
        dv = CubicSpline(x, v)(x, 1)
        du = CubicSpline(x, u)(x, 1)
        fs = self.model.f(v ** 2 - u ** 2)
        r1 = du - (self.omega - 1 + fs) * v
        r2 = dv + (1 + self.omega - fs) * u
        sl = slice(4, -4)   # spline end conditions
        return float(max(np.abs(r1[sl]).max(), np.abs(r2[sl]).max()))


def _sample(model, raw, x):
    omega = raw.omega
    s, gm = _vu(model, raw, x)
    u2 = s * gm / (2 * omega)
    if np.any(u2 < -1e-13 * s.max()):
        raise WaveError("level-set violation")
    v = np.sqrt(s * (gm + 2 * omega) / (2 * omega))
    u = np.sqrt(np.maximum(u2, 0.0))
    return v, u


def solve_wave(model, omega, x_max=None, n=8192, derivatives=True):
    if not 0.0 < omega < 1.0:
        raise ValueError(f"omega must lie in (0,1), got {omega}")
    if n < 16:
        raise ValueError("n too small")
    if x_max is None:
        x_max = default_xmax(omega)
    raw = _integrate(model, omega, x_max)
    x = np.linspace(0.0, x_max, n)
    v, u = _sample(model, raw, x)
    dQ = float("nan")
    rich = float("nan")
    if derivatives:
        h = min(DOMEGA, 0.5 * omega, 0.5 * (1 - omega))

        def Qat(w):
            return _integrate(model, w, x_max).Q

        d1 = (Qat(omega + h) - Qat(omega - h)) / (2 * h)
        d2 = (Qat(omega + h / 2) - Qat(omega - h / 2)) / h
        # Richardson: the O(h^2) terms cancel
        dQ = (4 * d2 - d1) / 3
        rich = abs(d2 - d1) / 3
    return SolitaryWave(model=model, omega=float(omega), Gamma=raw.Gamma, x=x, v=v, u=u,
                        Q=raw.Q, En=raw.En, dQdomega=dQ, x_max=float(x_max), n=int(n),
                        dQ_richardson=rich, _raw=raw)


def charge_energy(wave):
    return wave.Q, wave.En, wave.dQdomega


def decay_check(wave):
    """Least-squares slope of log v over [x_max/2, x_max], returned as a positive rate."""
    m = wave.x >= wave.x_max / 2
    v = wave.v[m]
    if np.any(v < 1e-280):
        raise WaveError("tail underflow")
    slope = np.polyfit(wave.x[m], np.log(v), 1)[0]
    return float(-slope)
