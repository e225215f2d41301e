"""Linearized operator JL at a solitary wave, in real 4-vector form R = [Re rho; Im rho].

    JL = J (J alpha d/dx + beta - omega + W),   W = diag(W1, W0)
and the eigenvalue problem JL psi = lambda psi is the first order system
    psi' = M psi,   M = alpha J beta - omega alpha J - lambda alpha + alpha J W.
"""
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import make_interp_spline

from .model import MAT
from .solitary_wave import solve_wave, DOMEGA

J4 = MAT.J4
BA = MAT.bold_alpha
BB = MAT.bold_beta
AJ = BA @ J4
AJB = AJ @ BB

# component index sets for the parity subspaces
X_EVEN = (0, 2)
X_ODD = (1, 3)


class JordanError(RuntimeError):
    pass


# ---------------------------------------------------------------- potentials

def _w_blocks(model, v, u):
    s = v * v - u * u
    fs = model.f(s)
    fp = model.fprime(s)
    n = np.shape(v)
    W0 = np.zeros(n + (2, 2))
    W0[..., 0, 0] = -fs
    W0[..., 1, 1] = fs
    W1 = W0.copy()
    W1[..., 0, 0] -= 2 * fp * v * v
    W1[..., 0, 1] += 2 * fp * v * u
    W1[..., 1, 0] += 2 * fp * v * u
    W1[..., 1, 1] -= 2 * fp * u * u
    return W0, W1


def _assemble(W0, W1):
    W = np.zeros(W0.shape[:-2] + (4, 4))
    W[..., :2, :2] = W1
    W[..., 2:, 2:] = W0
    return W


class Potentials:
    """W sampled on the wave's symmetric grid, plus a quintic spline for W(x)."""

    def __init__(self, wave, scale=1.0, corrupt=0.0):
        self.wave = wave
        self.scale = float(scale)
        self.corrupt = float(corrupt)     # fault injection: non-decaying bump
        x, v, u = wave.full_line()
        W0, W1 = _w_blocks(wave.model, v, u)
        W = _assemble(W0, W1)
        if corrupt:
            W = W + corrupt * np.eye(4) / (1 + x[:, None, None] ** 2)
        self.x = x
        self.W0 = scale * W0
        self.W1 = scale * W1
        self.W = scale * W
        # entries on x >= 0: W0[0,0], W1[0,0], W1[0,1] (odd), W1[1,1]
        h = wave.n - 1
        tab = np.stack([W0[h:, 0, 0], W1[h:, 0, 0], W1[h:, 0, 1], W1[h:, 1, 1]], axis=1)
        self._spl = make_interp_spline(wave.x, scale * tab, k=5)
        self._reach = None

    @property
    def omega(self):
        return self.wave.omega

    @property
    def k(self):
        return self.wave.model.k

    def at(self, x):
        """W(x) as (..., 4, 4) for arbitrary x."""
        x = np.asarray(x, dtype=float)
        W = np.zeros(x.shape + (4, 4))
        if self.scale != 0.0:
            ax = np.minimum(np.abs(x), self.wave.x_max)
            t = self._spl(ax)
            a, b, c, d = t[..., 0], t[..., 1], t[..., 2] * np.sign(x), t[..., 3]
            W[..., 0, 0] = b
            W[..., 0, 1] = c
            W[..., 1, 0] = c
            W[..., 1, 1] = d
            W[..., 2, 2] = a
            W[..., 3, 3] = -a
        if self.corrupt:
            W = W + self.corrupt * np.eye(4) / (1 + x[..., None, None] ** 2)
        return W

    def reach(self, tol=1e-17):
        """Point beyond which |W| stays below tol relative to its maximum."""
        if self._reach is None:
            if self.scale == 0.0 and not self.corrupt:
                self._reach = 0.0
            else:
                nrm = np.abs(self.W).reshape(len(self.x), -1).max(axis=1)
                big = np.nonzero(nrm > tol * nrm.max())[0]
                xr = np.abs(self.x[big]).max() if len(big) else 0.0
                self._reach = float(min(xr + 1.0, self.wave.x_max))
        return self._reach


def potentials(wave, scale=1.0, corrupt=0.0):
    return Potentials(wave, scale=scale, corrupt=corrupt)


def free_potentials(wave):
    return potentials(wave, scale=0.0)


def decay_fit(pot, window=None):
    """Fitted exponential rate of |W(x)| on the tail; compare with 2 k delta."""
    x = pot.x
    nrm = np.abs(pot.W).reshape(len(x), -1).max(axis=1)
    if window is None:
        xr = pot.reach(1e-14)
        window = (0.4 * xr, 0.8 * xr)
    m = (x >= window[0]) & (x <= window[1]) & (nrm > 0)
    slope, c = np.polyfit(x[m], np.log(nrm[m]), 1)
    return float(-slope), float(np.exp(c))


# ------------------------------------------------------ coefficient matrices

def M0(lam, omega):
    lam = np.asarray(lam, dtype=complex)
    return AJB - omega * AJ - lam[..., None, None] * BA


def coefficient_matrix(x, lam, omega, pot):
    return M0(lam, omega) + AJ @ pot.at(x)


# ------------------------------------------------------- free eigenstructure

@dataclass
class FreeEigenstructure:
    lam: complex
    omega: float
    xi1: complex
    xi2: complex
    kappa1: float
    kappa2: float
    Xi1: np.ndarray
    Xi2: np.ndarray
    H1: np.ndarray
    H2: np.ndarray
    c1: float
    c2: float
    threshold: tuple

    @property
    def xi(self):
        return (self.xi1, self.xi2)

    @property
    def Xi(self):
        return (self.Xi1, self.Xi2)

    @property
    def H(self):
        return (self.H1, self.H2)


def _pick(z, real_sign, ref):
    r = np.sqrt(complex(z))
    if ref is not None:
        return r if abs(r - ref) <= abs(r + ref) else -r
    if abs(r.imag) > 1e-13 * (abs(r) + 1.0):
        return r if r.imag > 0 else -r
    return complex(abs(r.real) * real_sign, abs(r.imag))


def xi_pair(lam, omega, side="minus", ref=None):
    """Spatial exponents (xi1, xi2).

    Off the continuous spectrum Im xi > 0 (e^{i xi x} decays as x -> +inf).
    Real xi (lambda on the essential spectrum) take the sign of the limit
    from Re lambda < 0 (side='minus') or Re lambda > 0 (side='plus').
    With ref given, the root nearest ref is chosen (continuation).
    """
    lam = complex(lam)
    sg = 1.0 if side == "minus" else -1.0
    s1 = sg * (1.0 if omega + lam.imag >= 0 else -1.0)
    s2 = sg * (1.0 if lam.imag - omega >= 0 else -1.0)
    r1 = ref[0] if ref is not None else None
    r2 = ref[1] if ref is not None else None
    xi1 = _pick((omega - 1j * lam) ** 2 - 1, s1, r1)
    xi2 = _pick((omega + 1j * lam) ** 2 - 1, s2, r2)
    return xi1, xi2


def asymptotic_vectors(lam, omega, xi1, xi2):
    a = 1.0 - omega
    X1 = np.array([1j * xi1, -1j * lam - a, -xi1, lam - 1j * a], dtype=complex)
    X2 = np.array([1j * xi2, 1j * lam - a, xi2, lam + 1j * a], dtype=complex)
    out = []
    for X, sg in ((X1, -1.0), (X2, 1.0)):
        c = float(np.linalg.norm(X))
        if c < 1e-300:
            # gap-edge threshold: limit direction of the normalized vector
            X = np.array([1j, 0, sg, 0], dtype=complex)
            c = float(np.linalg.norm(X))
        out.append((X / c, c))
    return out


def free_eigenstructure(lam, omega, side="minus", ref=None, thr=1e-8):
    lam = complex(lam)
    xi1, xi2 = xi_pair(lam, omega, side, ref)
    (X1, c1), (X2, c2) = asymptotic_vectors(lam, omega, xi1, xi2)
    return FreeEigenstructure(lam=lam, omega=omega, xi1=xi1, xi2=xi2,
                              kappa1=abs(xi1.imag), kappa2=abs(xi2.imag),
                              Xi1=X1, Xi2=X2, H1=BB @ X1, H2=BB @ X2, c1=c1, c2=c2,
                              threshold=(abs(xi1) < thr, abs(xi2) < thr))


def free_residual(fe, x=0.7):
    """Residual of (psi' - M0 psi) for the four free exponential solutions."""
    M = M0(fe.lam, fe.omega)
    res = 0.0
    for xi, X, H in zip(fe.xi, fe.Xi, fe.H):
        for vec, q in ((X, 1j * xi), (H, -1j * xi)):
            psi = vec * np.exp(q * x)
            res = max(res, float(np.abs(q * psi - M @ psi).max() / (np.abs(psi).max())))
    return res


# -------------------------------------------------------- grid derivatives

def d4(f, h):
    """4th order first derivative along axis 0, one-sided at the ends."""
    f = np.asarray(f)
    d = np.empty_like(f)
    d[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h)
    d[0] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h)
    d[1] = (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) / (12 * h)
    d[-1] = (25 * f[-1] - 48 * f[-2] + 36 * f[-3] - 16 * f[-4] + 3 * f[-5]) / (12 * h)
    d[-2] = (3 * f[-1] + 10 * f[-2] - 18 * f[-3] + 6 * f[-4] - f[-5]) / (12 * h)
    return d


def grid_step(wave):
    return wave.x[1] - wave.x[0]


def inner(wave, a, b):
    """<a, b> = int conj(a) . b dx on the symmetric grid."""
    return np.sum(np.conj(a) * b) * grid_step(wave)


def norm(wave, a):
    return float(np.sqrt(abs(inner(wave, a, a))))


def apply_JL(wave, psi, pot=None):
    """JL psi = -alpha psi' + J (beta - omega + W) psi with 4th order differences."""
    if pot is None:
        pot = potentials(wave)
    psi = np.asarray(psi)
    dpsi = d4(psi, grid_step(wave))
    A = BB[None] - wave.omega * np.eye(4)[None] + pot.W
    return -dpsi @ BA.T + np.einsum("ij,njk,nk->ni", J4, A, psi)


# ---------------------------------------------------------- kernel / Jordan

def phi4(wave):
    x, v, u = wave.full_line()
    out = np.zeros((len(x), 4))
    out[:, 0] = v
    out[:, 1] = u
    return out


def omega_derivatives(wave, h=DOMEGA):
    """(d/domega phi, d^2/domega^2 phi) on the wave's grid.

    Five-point centered stencils in omega (4th order); the plain 3-point
    difference leaves an O(h^2) error visible in the Jordan residual.
    """
    h = min(h, wave.omega / 3, (1 - wave.omega) / 3)
    x, v, u = wave.full_line()
    nb = {}
    for j in (-2, -1, 1, 2):
        wv = solve_wave(wave.model, wave.omega + j * h, x_max=wave.x_max, n=16,
                        derivatives=False)
        nb[j] = np.stack(wv.profile(x), axis=1)
    p0 = np.stack([v, u], axis=1)
    d1 = (8 * (nb[1] - nb[-1]) - (nb[2] - nb[-2])) / (12 * h)
    d2 = (16 * (nb[1] + nb[-1]) - (nb[2] + nb[-2]) - 30 * p0) / (12 * h * h)
    z = np.zeros_like(d1)
    return np.concatenate([d1, z], axis=1), np.concatenate([d2, z], axis=1)


@dataclass
class KernelBundle:
    x: np.ndarray
    phi: np.ndarray
    Jphi: np.ndarray
    dxphi: np.ndarray
    domphi: np.ndarray
    jordan2: np.ndarray
    dom2phi: np.ndarray
    residuals: dict


def kernel_vectors(wave, check=True, tol=1e-5):
    pot = potentials(wave)
    x = wave.full_line()[0]
    ph = phi4(wave)
    Jphi = ph @ J4.T
    dxphi = d4(ph, grid_step(wave))
    dom, dom2 = omega_derivatives(wave)
    jordan2 = wave.omega * x[:, None] * Jphi - 0.5 * ph @ BA.T
    nphi = norm(wave, ph)
    res = {
        "JL_Jphi": norm(wave, apply_JL(wave, Jphi, pot)) / nphi,
        "JL_dxphi": norm(wave, apply_JL(wave, dxphi, pot)) / nphi,
        "JL_domphi": norm(wave, apply_JL(wave, dom, pot) - Jphi),
        "JL_jordan2": norm(wave, apply_JL(wave, jordan2, pot) - dxphi),
    }
    if check and max(res["JL_domphi"], res["JL_jordan2"]) > tol:
        raise JordanError(f"Jordan residual too large: {res}")
    return KernelBundle(x=x, phi=ph, Jphi=Jphi, dxphi=dxphi, domphi=dom,
                        jordan2=jordan2, dom2phi=dom2, residuals=res)


def two_omega_vectors(wave):
    """Eigenvectors for +2 omega i and -2 omega i, in that order.

    rho = sigma1 phi e^{2 i omega t} solves the linearized equation, so in the
    real representation (sigma1 phi; -i sigma1 phi) belongs to +2 omega i.
    """
    x, v, u = wave.full_line()
    a = np.stack([u, v], axis=1).astype(complex)
    return np.concatenate([a, -1j * a], axis=1), np.concatenate([a, 1j * a], axis=1)


# ------------------------------------------------------------------ parity

def reflect(psi):
    """(P psi)(x) = beta psi(-x) on the symmetric grid."""
    return psi[::-1] @ BB.T


def parity_error(psi, space="X"):
    """Sup deviation from X (components 1,3 even, 2,4 odd) or its complement."""
    r = reflect(psi)
    e = psi - r if space == "X" else psi + r
    scale = max(np.abs(psi).max(), 1e-300)
    return float(np.abs(e).max() / scale)


# ------------------------------------------------------------- projectors

class ProjectorError(RuntimeError):
    pass


@dataclass
class Projector:
    wave: object
    phi: np.ndarray
    domphi: np.ndarray
    dQ: float

    def pd(self, psi):
        wv = self.wave
        Jd = self.domphi @ J4.T
        a = 2 * inner(wv, self.phi, psi) / self.dQ
        b = 2 * inner(wv, Jd, psi) / self.dQ
        return a * self.domphi + b * (self.phi @ J4.T)

    def pc(self, psi):
        return psi - self.pd(psi)


def make_projector(wave, bundle=None):
    if bundle is None:
        ph = phi4(wave)
        dom = omega_derivatives(wave)[0]
    else:
        ph, dom = bundle.phi, bundle.domphi
    # Q' as the discrete pairing keeps P_d exactly idempotent on the grid
    dQ = 2 * float(np.real(inner(wave, ph, dom)))
    if abs(dQ) < 1e-6:
        raise ProjectorError("degenerate projector")
    return Projector(wave=wave, phi=ph, domphi=dom, dQ=dQ)


def project(wave, psi, which="c", projector=None):
    P = projector or make_projector(wave)
    return P.pd(psi) if which == "d" else P.pc(psi)
