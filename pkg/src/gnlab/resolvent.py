"""Green's function of JL - lambda from Jost solutions.

    G(x,y) = -K(x,y) Delta(y)^{-1} alpha,
    K = Theta(x-y) f_j(x) Gamma_jk g_k(y)^*  +  Theta(y-x) g_j(x) Gamma_jk f_k(y)^*,
    Delta(y) = f_j Gamma_jk g_k^* - g_j Gamma_jk f_k^*   (at y).

K jumps by Delta(y) across x = y, so -alpha (d/dx - M) G = delta(x-y) I.
The result does not depend on Gamma (nor on the basis used to build it);
Gamma only matters for the term-by-term bounds.
"""
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, svds

from .linearization import BA, BB, coefficient_matrix, free_eigenstructure
from .jost import propagate, connection_matrices


class ResolventError(RuntimeError):
    pass


def gamma_matrix(B):
    """Gamma from the second row of B: det = -1 and B21 G11 + B22 G21 = 0."""
    B = np.asarray(B, dtype=complex)
    b1, b2 = B[1, 0], B[1, 1]
    a1, a2 = abs(b1), abs(b2)
    if a1 + a2 < 1e-12:
        raise ResolventError("degenerate B row")
    if a1 == 0 or a2 == 0:
        e = 1.0 + 0j
    else:
        e = -b1 * a2 / (b2 * a1)
        e /= abs(e)
    n = np.hypot(a1, a2)
    return np.array([[a2, a1 / e], [a1 * e, -a2]], dtype=complex) / n


def gamma_residual(B, G):
    B = np.asarray(B)
    return abs(B[1, 0] * G[0, 0] + B[1, 1] * G[1, 0])


def eq_inverse_check(rng, N=4):
    """det(sum u_j A_jk v_k^*) vs det A det[u] conj(det[v]) on random data."""
    def c(*shape):
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    U, V, A = c(N, N), c(N, N), c(N, N)
    lhs = np.linalg.det(U @ A @ V.conj().T)
    rhs = np.linalg.det(A) * np.linalg.det(U) * np.conj(np.linalg.det(V))
    return abs(lhs - rhs) / abs(rhs)


# ------------------------------------------------------------ Jost on a grid

@dataclass
class JostGrid:
    lam: complex
    omega: float
    x: np.ndarray
    f: np.ndarray       # (N,4,2) f1, f2
    g: np.ndarray       # (N,4,2) g1, g2
    xi: tuple


def jost_grid(pot, lam, x, branch="minus"):
    """f_j and g_j(x) = beta f_j(-x) sampled on x (any signs)."""
    lam = complex(lam)
    x = np.asarray(x, dtype=float)
    fe = free_eigenstructure(lam, pot.omega, side=branch)
    if any(fe.threshold):
        raise ResolventError("threshold lambda")
    pts = np.union1d(x, -x)
    q = np.array([1j * fe.xi1, 1j * fe.xi2])
    Y0 = np.stack([fe.Xi1, fe.Xi2], axis=1)[None]
    eta = propagate(pot, [lam], Y0, q[None], pts)[:, 0]
    fall = eta * np.exp(np.outer(pts, q))[:, None, :]
    idx = np.searchsorted(pts, x)
    ridx = np.searchsorted(pts, -x)
    f = fall[idx]
    g = np.einsum("ij,njk->nik", BB, fall[ridx])
    return JostGrid(lam=lam, omega=pot.omega, x=x, f=f, g=g, xi=(fe.xi1, fe.xi2))


def _delta(f, g, Gam):
    fh = np.conj(np.swapaxes(f, -1, -2))
    gh = np.conj(np.swapaxes(g, -1, -2))
    return f @ Gam @ gh - g @ Gam @ fh


def delta_matrix(pot, y, lam, Gamma=None, branch="minus"):
    """Delta(y) for each y and its determinant."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    jg = jost_grid(pot, lam, y, branch)
    if Gamma is None:
        Gamma = gamma_for(pot, lam)
    D = _delta(jg.f, jg.g, Gamma)
    return D, np.linalg.det(D)


def gamma_for(pot, lam):
    cm = connection_matrices(lam, pot.omega, pot, basis="Ftilde")
    return gamma_matrix(cm.B)


def wronskian(jg, i=None):
    cols = np.concatenate([jg.f, jg.g], axis=-1)
    return np.linalg.det(cols if i is None else cols[i])


# ------------------------------------------------------------------- Green

@dataclass
class GreenEvaluation:
    lam: complex
    side: str
    omega: float
    x: np.ndarray
    y: np.ndarray
    G: np.ndarray          # (Nx,Ny,4,4)
    gamma: np.ndarray
    deltadet: np.ndarray   # det Delta at each y
    E: complex


def _theta(d):
    return np.where(d > 0, 1.0, np.where(d < 0, 0.0, 0.5))


def _blocks(jx, jy, Gam):
    """Right factors U_j, L_j with G = -(Theta Fx U + Theta' Gx L)."""
    D = _delta(jy.f, jy.g, Gam)
    Dinv = np.linalg.inv(D)
    gh = np.conj(np.swapaxes(jy.g, -1, -2))
    fh = np.conj(np.swapaxes(jy.f, -1, -2))
    U = Gam @ gh @ Dinv @ BA
    L = Gam @ fh @ Dinv @ BA
    return U, L, D


def green_eval(pot, x, y, lam, side="minus", mode="swap", eps=1e-6, Gamma=None,
               e_tol=1e-8):
    """Kernel samples G(x_i, y_j) of (JL - lambda)^{-1} on the boundary side.

    mode='swap': real xi take the sign of the limit from the chosen side.
    mode='offset': evaluate at lambda -+ eps instead (cross-check).
    """
    lam = complex(lam)
    if mode == "offset":
        lam_e = lam - eps if side == "minus" else lam + eps
        branch = "minus"
    else:
        lam_e, branch = lam, side
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    jx = jost_grid(pot, lam_e, x, branch)
    jy = jost_grid(pot, lam_e, y, branch)
    E = wronskian(jy, 0)
    if abs(E) < e_tol:
        raise ResolventError("Evans zero: resolvent undefined")
    if Gamma is None:
        try:
            Gamma = gamma_for(pot, lam_e)
        except Exception:
            Gamma = np.array([[1, 0], [0, -1]], dtype=complex)
    U, L, D = _blocks(jx, jy, Gamma)
    th = _theta(x[:, None] - y[None, :])
    up = np.einsum("iak,jkb->ijab", jx.f, U)
    lo = np.einsum("iak,jkb->ijab", jx.g, L)
    G = -(th[..., None, None] * up + (1 - th)[..., None, None] * lo)
    return GreenEvaluation(lam=lam, side=side, omega=pot.omega, x=x, y=y, G=G, gamma=Gamma,
                           deltadet=np.linalg.det(D), E=complex(E))


def free_green(lam, omega, x, y, side="minus"):
    """Closed-form free kernel from the eigen-decomposition of M0."""
    fe = free_eigenstructure(lam, omega, side=side)
    V = np.stack([fe.Xi1, fe.Xi2, fe.H1, fe.H2], axis=1)
    Vi = np.linalg.inv(V)
    q = np.array([1j * fe.xi1, 1j * fe.xi2, -1j * fe.xi1, -1j * fe.xi2])
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    d = x[:, None] - y[None, :]
    th = _theta(d)
    ex = np.exp(d[..., None] * q)                     # (Nx,Ny,4)
    ws = th[..., None] * ex * np.array([1, 1, 0, 0])
    wu = (1 - th)[..., None] * ex * np.array([0, 0, 1, 1])
    core = np.einsum("ak,ijk,kb->ijab", V, ws - wu, Vi)
    return -core @ BA


def delta_residual(pot, lam, y, side="minus", half_width=3.0, h=2e-3):
    """Discrete check of -alpha (d/dx - M) G(., y) = delta(x - y) I.

    Returns (off-diagonal residual, error of the integrated delta), both
    relative to max |G|.
    """
    n = int(round(half_width / h))
    x = y + h * np.arange(-n, n + 1)
    ge = green_eval(pot, x, [y], lam, side)
    G = ge.G[:, 0]
    dG = np.empty_like(G)
    dG[2:-2] = (G[:-4] - 8 * G[1:-3] + 8 * G[3:-1] - G[4:]) / (12 * h)
    M = coefficient_matrix(x, ge.lam, pot.omega, pot)
    R = -np.einsum("ab,nbc->nac", BA, dG - M @ G)
    scale = np.abs(G).max()
    off = np.abs(x - y) > 2.5 * h
    off[:2] = off[-2:] = False
    off_res = np.abs(R[off]).max() / scale
    # the delta sits in the jump at x = y; one-sided quadratic extrapolation
    right = 3 * G[n + 1] - 3 * G[n + 2] + G[n + 3]
    left = 3 * G[n - 1] - 3 * G[n - 2] + G[n - 3]
    jump = right - left
    lhs = -BA @ jump
    delta_err = np.abs(lhs - np.eye(4)).max()
    return float(off_res), float(delta_err)


def growth_exponents(ge, tail=0.5):
    """Slopes of log max|G| against log<y> and log<x> over the outer part of the box."""
    A = np.abs(ge.G).max(axis=(2, 3))
    out = []
    for axis, z in ((0, ge.y), (1, ge.x)):
        m = A.max(axis=axis)
        sel = np.abs(z) >= tail * np.abs(z).max()
        p = np.polyfit(np.log(np.sqrt(1 + z[sel] ** 2)), np.log(m[sel]), 1)
        out.append(float(p[0]))
    return tuple(out)


def growth_constant(ge):
    jx = np.sqrt(1 + ge.x ** 2)[:, None]
    jy = np.sqrt(1 + ge.y ** 2)[None, :]
    A = np.abs(ge.G).max(axis=(2, 3))
    return float((A / (np.minimum(jx, jy) * jy)).max())


# ------------------------------------------------------- weighted bounds

def weighted_operator(pot, lam, s, half_width=20.0, h=None, side="minus"):
    """<x>^{-s} (JL - lambda)^{-1} <x>^{-s} on a grid, as a LinearOperator.

    Uses the separable structure of G, so one application costs O(N).
    """
    lam = complex(lam)
    if h is None:
        h = min(0.02, 0.4 / max(1.0, abs(lam)))
    n = int(round(half_width / h))
    x = h * np.arange(-n, n + 1)
    jg = jost_grid(pot, lam, x, side)
    try:
        Gam = gamma_for(pot, lam)
    except Exception:
        # G does not depend on Gamma, any det = -1 choice will do
        Gam = np.array([[1, 0], [0, -1]], dtype=complex)
    U, L, _ = _blocks(jg, jg, Gam)
    w = (1 + x ** 2) ** (-s / 2)
    F, Gx = jg.f, jg.g
    N = len(x)
    Fh = np.conj(np.swapaxes(F, -1, -2))
    Gh = np.conj(np.swapaxes(Gx, -1, -2))
    Uh = np.conj(np.swapaxes(U, -1, -2))
    Lh = np.conj(np.swapaxes(L, -1, -2))

    def mv(v):
        v = v.reshape(N, 4) * w[:, None]
        a = np.einsum("jkb,jb->jk", U, v) * h
        b = np.einsum("jkb,jb->jk", L, v) * h
        ca = np.cumsum(a, axis=0) - 0.5 * a           # sum_{j<i} + a_i / 2
        cb = np.cumsum(b[::-1], axis=0)[::-1] - 0.5 * b
        out = -(np.einsum("iak,ik->ia", F, ca) + np.einsum("iak,ik->ia", Gx, cb))
        return (out * w[:, None]).ravel()

    def rmv(z):
        z = z.reshape(N, 4) * w[:, None]
        p = np.einsum("ika,ia->ik", Fh, z)
        r = np.einsum("ika,ia->ik", Gh, z)
        cp = np.cumsum(p[::-1], axis=0)[::-1] - 0.5 * p  # sum_{i>j} + p_j / 2
        cr = np.cumsum(r, axis=0) - 0.5 * r
        out = -(np.einsum("jbk,jk->jb", Uh, cp) + np.einsum("jbk,jk->jb", Lh, cr)) * h
        return (out * w[:, None]).ravel()

    return LinearOperator((4 * N, 4 * N), matvec=mv, rmatvec=rmv, dtype=complex), x


def weighted_norm(pot, lam, s, **kw):
    op, _ = weighted_operator(pot, lam, s, **kw)
    sv = svds(op, k=1, tol=1e-6, return_singular_vectors=False,
              random_state=np.random.default_rng(0))
    return float(sv[0])


@dataclass
class BoundRow:
    lam: complex
    s: float
    norm: float
    ok: bool = True
    error: str = ""


def lap_bound_probe(pot, s_weight, lambdas, side="minus", **kw):
    """Weighted resolvent norm estimates; failures are recorded per lambda."""
    if s_weight <= 3:
        raise ValueError("weight exponent must exceed 3")
    rows = []
    for lam in lambdas:
        try:
            rows.append(BoundRow(complex(lam), s_weight, weighted_norm(pot, lam, s_weight,
                                                                      side=side, **kw)))
        except Exception as exc:
            rows.append(BoundRow(complex(lam), s_weight, np.nan, ok=False, error=str(exc)))
    return rows
