"""Jost solutions of psi' = M(x, lambda) psi.

Each solution is stored in scaled form psi(x) = eta(x) e^{q x}, where q is the
exponent of its asymptotic (q = i xi_j for f_j, q = -i xi_j for F_j), so that
eta stays O(1) and no renormalization is needed.  Integration starts where W
has dropped below roundoff; beyond that point the free formula is exact.
"""
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .linearization import (AJ, BB, M0, free_eigenstructure, asymptotic_vectors)

RTOL = 1e-11
ATOL = 1e-13


class JostError(RuntimeError):
    pass


class ThresholdError(JostError):
    pass


def _dop853(rhs, x0, x1, y0, x_eval=None, dense=False):
    sol = solve_ivp(rhs, (x0, x1), y0, method="DOP853", rtol=RTOL, atol=ATOL,
                    t_eval=x_eval, dense_output=dense)
    if not sol.success:
        raise JostError(f"integration failure: {sol.message}")
    return sol


def propagate(pot, lams, Y0, Q, x_eval, x0=None):
    """Integrate scaled solutions for a batch of spectral parameters.

    lams: (B,), Y0: (B,4,m) values of eta at x0, Q: (B,m) exponents.
    Returns eta at x_eval as (P,B,4,m).  Points beyond x0 (toward +inf for
    x_eval < x0) keep the free value eta = Y0.
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    Y0 = np.asarray(Y0, dtype=complex)
    Q = np.asarray(Q, dtype=complex)
    B, _, m = Y0.shape
    x_eval = np.atleast_1d(np.asarray(x_eval, dtype=float))
    if x0 is None:
        x0 = pot.reach()
    out = np.empty((len(x_eval), B, 4, m), dtype=complex)
    out[:] = Y0[None]
    inside = x_eval < x0
    if not np.any(inside):
        return out
    Ms = M0(lams, pot.omega)
    if pot.scale == 0.0 and not pot.corrupt:
        # constant coefficients: exact; Y0 need not be a single mode
        d = x_eval[inside] - x0
        for b in range(B):
            D, V = np.linalg.eig(Ms[b])
            if np.linalg.cond(V) < 1e8:
                Z = np.linalg.solve(V, Y0[b])                       # (4,m)
                e = np.exp(d[:, None, None] * (D[None, :, None] - Q[b][None, None, :]))
                out[inside, b] = np.einsum("ij,pjc->pic", V, e * Z[None])
            else:
                # near a threshold M0 is defective
                for i, di in zip(np.nonzero(inside)[0], d):
                    for c in range(m):
                        out[i, b, :, c] = expm((Ms[b] - Q[b, c] * np.eye(4)) * di) @ Y0[b, :, c]
        return out

    def rhs(x, y):
        eta = y.reshape(B, 4, m)
        M = Ms + AJ @ pot.at(x)
        d = M @ eta - eta * Q[:, None, :]
        if not np.all(np.isfinite(d)):
            raise JostError("stiff blow-up")
        return d.ravel()

    xs = x_eval[inside]
    order = np.argsort(-xs, kind="stable")
    sol = _dop853(rhs, x0, xs[order[-1]], Y0.ravel(), x_eval=xs[order])
    vals = sol.y.T.reshape(len(xs), B, 4, m)
    tmp = np.empty_like(vals)
    tmp[order] = vals
    out[inside] = tmp
    if np.abs(out).max() > 1e12:
        raise JostError("stiff blow-up")
    return out


def eps_sign(lam, j):
    """H_j = eps_j Xi_j at the threshold of channel j (same half plane as lambda)."""
    upper = complex(lam).imag >= 0
    if upper:
        return 1.0 if j == 1 else -1.0
    return -1.0 if j == 1 else 1.0


@dataclass
class JostSolution:
    lam: complex
    omega: float
    side: str            # plus_infinity / minus_infinity
    index: int
    kind: str            # decaying_f / antidecaying_F / modified_Ftilde
    x: np.ndarray
    eta: np.ndarray      # (N,4); samples = eta e^{q x}
    q: complex
    asympt: np.ndarray
    xi: complex

    @property
    def samples(self):
        return self.eta * np.exp(self.q * self.x)[:, None]


def _label(kind):
    return {"f": "decaying_f", "F": "antidecaying_F", "Ft": "modified_Ftilde"}[kind]


def _free_ftilde(fe, lam, j, x, eps):
    """Free modified solution F + (f - eps F)/(2 i xi) at x (no scaling)."""
    xi = fe.xi[j - 1]
    X = fe.Xi[j - 1]
    H = fe.H[j - 1]
    x = np.asarray(x, dtype=float)[..., None]
    return H * np.exp(-1j * xi * x) + (X * np.exp(1j * xi * x) - eps * H * np.exp(-1j * xi * x)) / (2j * xi)


def _lam_of_xi(lam_t, omega, j, xi):
    # invert xi_j(lambda)^2 = (omega -+ i lambda)^2 - 1 near the threshold lam_t
    r = np.sqrt(1 + xi * xi)
    if j == 1:
        cands = [-1j * (omega - r), -1j * (omega + r)]
    else:
        cands = [1j * (omega - r), 1j * (omega + r)]
    return min(cands, key=lambda c: abs(c - lam_t))


def threshold_ftilde_data(lam, omega, j, x, h=1e-3, levels=4):
    """Pointwise limit of the free F~_j at a threshold, by Richardson in xi."""
    eps = eps_sign(lam, j)
    vals = []
    for m in range(levels):
        xi = h * 2.0 ** (-m)
        lm = _lam_of_xi(lam, omega, j, xi)
        fe = free_eigenstructure(lm, omega)
        xs = list(fe.xi)
        xs[j - 1] = complex(xi)
        (X1, c1), (X2, c2) = asymptotic_vectors(lm, omega, *xs)
        Xi = (X1, X2)[j - 1]
        H = BB @ Xi
        xx = np.asarray(x, dtype=float)[..., None]
        vals.append(H * np.exp(-1j * xi * xx) + (Xi * np.exp(1j * xi * xx) - eps * H * np.exp(-1j * xi * xx)) / (2j * xi))
    # Richardson table for an expansion in integer powers of xi
    T = vals
    for lev in range(1, levels):
        T = [(2 ** lev * T[i + 1] - T[i]) / (2 ** lev - 1) for i in range(len(T) - 1)]
    return T[0]


def jost_solve(lam, omega, pot, side="plus", index=1, kind="f", x=None, branch="minus",
               ref=None):
    """One Jost solution sampled on x (default: the potential's grid)."""
    lam = complex(lam)
    fe = free_eigenstructure(lam, omega, side=branch, ref=ref)
    j = index
    xi = fe.xi[j - 1]
    if x is None:
        x = pot.x
    x = np.asarray(x, dtype=float)
    if kind in ("f", "F") and fe.threshold[j - 1]:
        raise ThresholdError("threshold degeneracy: use the modified solution")
    sgn = 1.0 if side == "plus" else -1.0
    # solutions at -inf are reflections of those at +inf: g(x) = beta f(-x)
    xx = sgn * x
    x0 = pot.reach()
    if kind == "f":
        q, Y = 1j * xi, fe.Xi[j - 1]
        eta = propagate(pot, [lam], Y[None, :, None], [[q]], xx, x0)[:, 0, :, 0]
    elif kind == "F":
        q, Y = -1j * xi, fe.H[j - 1]
        eta = propagate(pot, [lam], Y[None, :, None], [[q]], xx, x0)[:, 0, :, 0]
    elif kind == "Ft":
        if fe.threshold[j - 1]:
            q = 0.0
            Y = threshold_ftilde_data(lam, omega, j, x0)
            # beyond x0 the solution is free: fill with the limit formula
            far = threshold_ftilde_data(lam, omega, j, np.maximum(xx, x0))
        else:
            eps = eps_sign(lam, j)
            q = -1j * xi if abs(xi.imag) > 0 else 0.0
            Y = _free_ftilde(fe, lam, j, x0, eps) * np.exp(-q * x0)
            far = _free_ftilde(fe, lam, j, np.maximum(xx, x0), eps) * np.exp(-q * np.maximum(xx, x0))[:, None]
        eta = propagate(pot, [lam], Y[None, :, None], [[q]], xx, x0)[:, 0, :, 0]
        outside = xx >= x0
        eta[outside] = far[outside]
    else:
        raise ValueError(f"unknown kind {kind!r}")
    asympt = fe.Xi[j - 1] if kind == "f" else fe.H[j - 1]
    if side != "plus":
        eta = eta @ BB.T
        q = -q
        asympt = BB @ asympt
    return JostSolution(lam=lam, omega=omega, side=f"{side}_infinity", index=j,
                        kind=_label(kind), x=x, eta=eta, q=complex(q), asympt=asympt, xi=xi)


def reflect_solution(js):
    """g_j(x) = beta f_j(-x) from samples on a symmetric grid."""
    x = js.x
    if not np.allclose(x, -x[::-1]):
        raise ValueError("reflection needs a symmetric grid")
    side = "minus_infinity" if js.side == "plus_infinity" else "plus_infinity"
    return JostSolution(lam=js.lam, omega=js.omega, side=side, index=js.index, kind=js.kind,
                        x=x, eta=js.eta[::-1] @ BB.T, q=-js.q, asympt=BB @ js.asympt, xi=js.xi)


def ode_residual(js, pot):
    """Relative residual of psi' = M psi on the sample grid (4th order differences)."""
    from .linearization import d4
    x = js.x
    h = x[1] - x[0]
    # scaled form: eta' = (M - q) eta
    d = d4(js.eta, h)
    M = M0(js.lam, js.omega) + AJ @ pot.at(x)
    r = d - np.einsum("nij,nj->ni", M, js.eta) + js.q * js.eta
    scale = np.abs(js.eta).max(axis=1)
    return float((np.abs(r).max(axis=1) / scale)[3:-3].max())


# --------------------------------------------------------- connection data

@dataclass
class ConnectionMatrices:
    lam: complex
    omega: float
    A: np.ndarray
    B: np.ndarray
    basis: str
    residual: float
    cond: float


def connection_matrices(lam, omega, pot, basis="Ftilde", window=(-2.0, 2.0), npts=41):
    """A, B with (g1,g2) = (f1,f2) A + (F~1,F~2) B (or the (f,F) basis)."""
    xs = np.linspace(window[0], window[1], npts)
    kind = "Ft" if basis == "Ftilde" else "F"
    f = [jost_solve(lam, omega, pot, "plus", j, "f", x=xs).samples for j in (1, 2)]
    F = [jost_solve(lam, omega, pot, "plus", j, kind, x=xs).samples for j in (1, 2)]
    g = [jost_solve(lam, omega, pot, "minus", j, "f", x=xs).samples for j in (1, 2)]
    Bas = np.stack(f + F, axis=-1)                 # (P,4,4)
    rhs = np.stack(g, axis=-1)                     # (P,4,2)
    # rescale columns so the least-squares problem is balanced
    cs = np.abs(Bas).max(axis=(0, 1))
    Mat = (Bas / cs).reshape(-1, 4)
    cond = float(np.linalg.cond(Mat))
    if cond > 1e12:
        raise JostError("basis degenerate")
    C, *_ = np.linalg.lstsq(Mat, rhs.reshape(-1, 2), rcond=None)
    C = C / cs[:, None]
    res = float(np.abs(np.einsum("pij,jk->pik", Bas, C) - rhs).max() / np.abs(rhs).max())
    return ConnectionMatrices(lam=complex(lam), omega=omega, A=C[:2], B=C[2:], basis=basis,
                              residual=res, cond=cond)


def free_connection(lam, omega, basis="Ftilde"):
    """Closed form A, B for W = 0 (g_j = F_j there)."""
    fe = free_eigenstructure(lam, omega)
    if basis == "F":
        return np.zeros((2, 2), complex), np.eye(2, dtype=complex)
    A = np.zeros((2, 2), complex)
    B = np.zeros((2, 2), complex)
    for j in (1, 2):
        xi = fe.xi[j - 1]
        e = eps_sign(lam, j)
        # F~ = (1 - e/(2 i xi)) F + f/(2 i xi)  =>  F = (F~ - f/(2 i xi)) / (1 - e/(2 i xi))
        d = 1 - e / (2j * xi)
        A[j - 1, j - 1] = -1 / (2j * xi) / d
        B[j - 1, j - 1] = 1 / d
    return A, B
