"""Evans function E(lambda) = det[f1, f2, g1, g2] and its parity halves.

With g_j(x) = beta f_j(-x), everything is read off f1, f2 on [-1, 1]:
    E_X     = minor of (f1, f2)(0) on rows 2,4 (eigenfunctions in X)
    E_Xperp = minor on rows 1,3
and |E| = 4 |E_X| |E_Xperp|.
The unit normalization of Xi_j is not analytic in lambda, so Newton steps and
winding numbers use the analytic variant E * (c1 c2)^2 (same zeros, same
winding).
"""
from dataclasses import dataclass, field

import numpy as np

from .model import MAT
from .linearization import BB, free_eigenstructure, potentials
from .jost import propagate, JostError
from .solitary_wave import solve_wave
from .parallel import pmap

ROWS_X = [1, 3]
ROWS_XP = [0, 2]
BATCH = 48


class EvansError(RuntimeError):
    pass


@dataclass
class EvansSample:
    lam: complex
    omega: float
    E: complex
    E_X: complex
    E_Xperp: complex
    drift: float
    hadamard: float
    c12: float
    xi: tuple
    ok: bool = True
    error: str = ""

    def value(self, parity="full", analytic=False):
        v = {"full": self.E, "X": self.E_X, "Xperp": self.E_Xperp}[parity]
        if analytic:
            v = v * (self.c12 ** 2 if parity == "full" else self.c12)
        return v

    def scaled(self, parity="full"):
        """Value divided by its Hadamard bound (dimensionless, <= 1)."""
        return self.value(parity) / self.hnorm[parity]

    hnorm: dict = field(default_factory=dict)


def _det2(a, b, rows):
    return a[..., rows[0]] * b[..., rows[1]] - a[..., rows[1]] * b[..., rows[0]]


def _chunk(pot, lams, branch, refs):
    omega = pot.omega
    B = len(lams)
    Y0 = np.zeros((B, 4, 2), complex)
    Q = np.zeros((B, 2), complex)
    c12 = np.zeros(B)
    xis = []
    for b, lam in enumerate(lams):
        fe = free_eigenstructure(lam, omega, side=branch, ref=None if refs is None else refs[b])
        Y0[b, :, 0] = fe.Xi1
        Y0[b, :, 1] = fe.Xi2
        Q[b] = (1j * fe.xi1, 1j * fe.xi2)
        c12[b] = fe.c1 * fe.c2
        xis.append((fe.xi1, fe.xi2))
    eta = propagate(pot, lams, Y0, Q, np.array([1.0, 0.0, -1.0]))   # (3,B,4,2)
    out = []
    for b, lam in enumerate(lams):
        dets = []
        for i, x in enumerate((1.0, 0.0, -1.0)):
            e = eta[i, b]
            er = eta[2 - i, b]          # at -x
            # exponential factors cancel pairwise between f_j(x) and g_j(x)
            cols = np.stack([e[:, 0], e[:, 1], BB @ er[:, 0], BB @ er[:, 1]], axis=1)
            dets.append(np.linalg.det(cols))
        e0 = eta[1, b]
        f1, f2 = e0[:, 0], e0[:, 1]
        had = np.linalg.norm(f1) ** 2 * np.linalg.norm(f2) ** 2
        EX = _det2(f1, f2, ROWS_X)
        EXp = _det2(f1, f2, ROWS_XP)
        h2 = np.linalg.norm(f1) * np.linalg.norm(f2)
        E0 = dets[1]
        drift = max(abs(dets[0] - E0), abs(dets[2] - E0)) / max(abs(E0), had)
        s = EvansSample(lam=complex(lam), omega=omega, E=E0, E_X=EX, E_Xperp=EXp,
                        drift=float(drift), hadamard=float(had), c12=float(c12[b]), xi=xis[b])
        s.hnorm = {"full": max(had, 1e-300), "X": max(h2, 1e-300), "Xperp": max(h2, 1e-300)}
        out.append(s)
    return out


def evans_batch(pot, lams, branch="minus", refs=None, batch=BATCH):
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    res = []
    for i in range(0, len(lams), batch):
        sl = slice(i, i + batch)
        try:
            res.extend(_chunk(pot, lams[sl], branch, None if refs is None else refs[sl]))
        except JostError:
            # retry one by one so a single failure does not sink the chunk
            for j, lam in enumerate(lams[sl]):
                try:
                    r = None if refs is None else [refs[i + j]]
                    res.extend(_chunk(pot, [lam], branch, r))
                except JostError as exc:
                    res.append(EvansSample(lam=complex(lam), omega=pot.omega, E=np.nan, E_X=np.nan,
                                           E_Xperp=np.nan, drift=np.nan, hadamard=np.nan,
                                           c12=np.nan, xi=(np.nan, np.nan), ok=False,
                                           error=str(exc)))
    return res


def evans_eval(lam, omega=None, pot=None, branch="minus", ref=None):
    if pot is None:
        raise ValueError("potentials required")
    return evans_batch(pot, [lam], branch, None if ref is None else [ref])[0]


def evans_function(pot, parity="full", branch="minus", ref=None, analytic=True):
    """Vectorized lambda -> E_parity(lambda) for contour work."""
    def fn(lams):
        lams = np.atleast_1d(lams)
        refs = None if ref is None else [ref] * len(lams)
        return np.array([s.value(parity, analytic) for s in evans_batch(pot, lams, branch, refs)])
    return fn


# --------------------------------------------------------------- winding

def winding_number(func, corners, n_edge=12, max_dphase=0.6, max_rounds=14, floor=0.0):
    """Argument-principle winding of func along the closed polygon `corners`.

    Edges are refined until consecutive phase jumps are below max_dphase.
    Returns (winding, min |func| on the contour, number of evaluations).
    """
    corners = list(corners) + [corners[0]]
    pts = []
    for a, b in zip(corners[:-1], corners[1:]):
        t = np.linspace(0, 1, n_edge, endpoint=False)
        pts.extend(a + (b - a) * t)
    pts = np.array(pts + [corners[0]], dtype=complex)
    vals = np.asarray(func(pts[:-1]), dtype=complex)
    vals = np.append(vals, vals[0])
    nev = len(pts) - 1
    for _ in range(max_rounds):
        if np.any(~np.isfinite(vals)):
            raise EvansError("non-finite Evans value on contour")
        if np.any(np.abs(vals) <= floor):
            raise EvansError("contour passes through a zero")
        d = np.angle(vals[1:] / vals[:-1])
        bad = np.nonzero(np.abs(d) > max_dphase)[0]
        if len(bad) == 0:
            w = np.sum(d) / (2 * np.pi)
            return int(round(w)), float(np.abs(vals).min()), nev
        mids = 0.5 * (pts[bad] + pts[bad + 1])
        mv = np.asarray(func(mids), dtype=complex)
        nev += len(mids)
        pts = np.insert(pts, bad + 1, mids)
        vals = np.insert(vals, bad + 1, mv)
    raise EvansError("winding refinement did not converge")


def rectangle(center, hw, hh=None):
    hh = hw if hh is None else hh
    c = complex(center)
    return [c + complex(-hw, -hh), c + complex(hw, -hh), c + complex(hw, hh), c + complex(-hw, hh)]


def _ref_for(pot, lam, branch="minus"):
    """Branch reference at lam for local analytic continuation (left limit on iR)."""
    lam = complex(lam)
    if abs(lam.real) < 1e-12:
        fe = free_eigenstructure(complex(-1e-9, lam.imag), pot.omega, side=branch)
        fe0 = free_eigenstructure(lam, pot.omega, side=branch)
        # keep the on-axis value but with the sign of the left limit
        return tuple(z0 if abs(z0 - z) <= abs(z0 + z) else -z0 for z0, z in zip(fe0.xi, fe.xi))
    fe = free_eigenstructure(lam, pot.omega, side=branch)
    return fe.xi


def local_winding(pot, center, radius, parity="full", branch="minus"):
    ref = _ref_for(pot, center, branch)
    fn = evans_function(pot, parity, branch, ref)
    return winding_number(fn, rectangle(center, radius))


# --------------------------------------------------------- zero location

@dataclass
class ZeroCertificate:
    lam: complex
    parity: str
    multiplicity: int
    radius: float
    residual: float
    iterations: int


def locate_zero(pot, lam0, parity="full", branch="minus", tol=1e-12, maxit=60,
                radius=1e-4, on_axis=None):
    """Complex Newton on the analytic Evans variant, then a winding certificate.

    Zeros on the imaginary axis inside the continuous spectrum are followed on
    the branch continued from Re lambda < 0; with on_axis=True the iterate is
    kept on iR (golden-section on |E| is the fallback there).
    """
    lam = complex(lam0)
    ref = _ref_for(pot, lam, branch)
    fn = evans_function(pot, parity, branch, ref)
    if on_axis is None:
        on_axis = abs(lam.real) < 1e-12
    it = 0
    conv = False
    prev = np.inf
    for it in range(1, maxit + 1):
        h = 1e-6 * max(1.0, abs(lam))
        if on_axis:
            v = fn([lam, lam + 1j * h, lam - 1j * h])
            d = (v[1] - v[2]) / (2j * h)
        else:
            v = fn([lam, lam + h, lam - h])
            d = (v[1] - v[2]) / (2 * h)
        if v[0] == 0:
            conv = True
            break
        step = v[0] / d
        if on_axis:
            step = 1j * step.imag
        if not np.isfinite(step):
            break
        # damp wild steps
        if abs(step) > 0.05:
            step *= 0.05 / abs(step)
        lam = lam - step
        a = abs(step)
        if a < tol * max(1.0, abs(lam)):
            conv = True
            break
        # stalled at the noise floor of E
        if a < 1e-8 * max(1.0, abs(lam)) and a > 0.5 * prev:
            conv = True
            break
        prev = a
    if not conv and on_axis:
        lam = _golden_axis(fn, lam, 1e-3)
        conv = True
    if not conv:
        raise EvansError("no convergence")
    mult, vmin, _ = winding_number(evans_function(pot, parity, branch, _ref_for(pot, lam, branch)),
                                   rectangle(lam, radius))
    res = abs(fn([lam])[0])
    return ZeroCertificate(lam=lam, parity=parity, multiplicity=mult, radius=radius,
                           residual=float(res), iterations=it)


def _golden_axis(fn, lam, width):
    a, b = lam.imag - width, lam.imag + width
    g = (np.sqrt(5) - 1) / 2
    for _ in range(80):
        c = b - g * (b - a)
        d = a + g * (b - a)
        fc, fd = np.abs(fn([1j * c, 1j * d]))
        if fc < fd:
            b = d
        else:
            a = c
    return 1j * 0.5 * (a + b)


def parity_classify_zero(pot, lam_star, tol=1e-6, radius=None):
    """Which of E_X, E_Xperp vanish at a zero of E: 'X', 'Xperp' or 'both'."""
    s = evans_eval(lam_star, pot=pot)
    if abs(s.scaled("full")) > tol:
        raise EvansError("not a zero")
    if radius is None:
        radius = 1e-4 if abs(lam_star) > 1e-3 else 0.05
    wX = local_winding(pot, lam_star, radius, "X")[0]
    wP = local_winding(pot, lam_star, radius, "Xperp")[0]
    if wX > 0 and wP > 0:
        return "both"
    if wX > 0:
        return "X"
    if wP > 0:
        return "Xperp"
    if abs(s.scaled("X")) < 10 * tol and abs(s.scaled("Xperp")) < 10 * tol:
        raise EvansError("ambiguous parity")
    return "X" if abs(s.scaled("X")) < abs(s.scaled("Xperp")) else "Xperp"


# ------------------------------------------------------------------ scans

@dataclass
class Bracket:
    lam: complex
    parity: str
    winding: int
    radius: float
    value: float


def _threshold_points(omega):
    return [1j * (1 - omega), 1j * (1 + omega), -1j * (1 - omega), -1j * (1 + omega)]


def scan_segment(pot, axis="imaginary", start=0.0, stop=1.0, n=200, parity="full",
                 thresh=1e-3, check_all_minima=True):
    """Samples of E along part of iR or R, plus certified zero brackets."""
    if n < 2:
        raise ValueError("n must be >= 2")
    t = np.linspace(start, stop, n)
    lams = 1j * t if axis.startswith("imag") else t.astype(complex)
    # step away from thresholds
    for th in _threshold_points(pot.omega):
        close = np.abs(lams - th) < 1e-8
        lams[close] += 1e-6j if axis.startswith("imag") else 1e-6
    samples = evans_batch(pot, lams)
    a = np.array([abs(s.scaled(parity)) if s.ok else np.nan for s in samples])
    brackets = []
    dt = abs(t[1] - t[0])
    for i in range(len(a)):
        lo = a[i - 1] if i > 0 else np.inf
        hi = a[i + 1] if i < len(a) - 1 else np.inf
        if not (a[i] <= lo and a[i] <= hi and np.isfinite(a[i])):
            continue
        if not check_all_minima and a[i] > thresh:
            continue
        r = 1.5 * dt
        # rectangles must not enclose a branch point
        avoid = list(_threshold_points(pot.omega))
        if min(start, stop) > 0 or max(start, stop) < 0:
            avoid.append(0.0)  # the kernel at 0 lies outside this segment
        dist = min(abs(lams[i] - th) for th in avoid)
        if dist < 1.5 * r:
            r = dist / 1.5
            if r < 1e-7:
                continue
        try:
            w = local_winding(pot, lams[i], r, parity)[0]
        except EvansError:
            # a zero sits on the contour: shrink once
            r *= 0.61
            w = local_winding(pot, lams[i], r, parity)[0]
        if w != 0:
            brackets.append(Bracket(lam=complex(lams[i]), parity=parity, winding=w, radius=r,
                                    value=float(a[i])))
    return samples, brackets


# ---------------------------------------------------------- continuation

class LostZero(EvansError):
    def __init__(self, msg, last_good):
        super().__init__(msg)
        self.last_good = last_good


@dataclass
class ZeroCurve:
    omegas: list
    lambdas: list
    parity: str
    multiplicities: list
    residuals: list
    reason: str = "done"


def _pot_for(model, omega):
    return potentials(solve_wave(model, omega, derivatives=False))


def track_curve(model, omega_from, omega_to, step, seed_lambda, parity="full", margin=2e-3,
                search=(0.6, 2.5)):
    """Follow a zero in omega: secant predictor, locate_zero corrector.

    Stops (reason 'edge') when the zero reaches i(1-|omega|) or leaves the
    search box (reason 'exit'); raises LostZero when the corrector fails
    away from the edge.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    n = int(np.floor(abs(omega_to - omega_from) / step + 1e-9))
    sgn = 1.0 if omega_to >= omega_from else -1.0
    omegas = [omega_from + sgn * step * i for i in range(n + 1)]
    if abs(omegas[-1] - omega_to) > 1e-12:
        omegas.append(omega_to)
    if len(omegas) > 1:
        # short first step so the secant has two points early
        omegas.insert(1, omega_from + sgn * step / 4)
    curve = ZeroCurve([], [], parity, [], [])
    guess = complex(seed_lambda)
    for w in omegas:
        if len(curve.lambdas) >= 2:
            w0, w1 = curve.omegas[-2:]
            l0, l1 = curve.lambdas[-2:]
            guess = l1 + (l1 - l0) * (w - w1) / (w1 - w0)
        elif curve.lambdas:
            guess = curve.lambdas[-1]
        edge = 1 - abs(w)
        on_axis = abs(guess.real) < 1e-10
        if on_axis and abs(guess.imag) > edge - margin:
            curve.reason = "edge"
            return curve
        pot = _pot_for(model, w)
        try:
            z = locate_zero(pot, guess, parity, on_axis=on_axis)
        except EvansError:
            z = None
        jump = 0.0 if not curve.lambdas else abs(curve.lambdas[-1] - guess)
        if z is None or z.multiplicity < 1 or abs(z.lam - guess) > max(0.02, 4 * step, 3 * jump):
            if on_axis and abs(guess.imag) > edge - 10 * step:
                curve.reason = "edge"
                return curve
            last = curve.omegas[-1] if curve.omegas else None
            raise LostZero(f"lost zero at omega={w}", last)
        lam = complex(z.lam)
        if abs(lam.real) > search[0] or abs(lam.imag) > search[1]:
            curve.reason = "exit"
            return curve
        curve.omegas.append(float(w))
        curve.lambdas.append(lam)
        curve.multiplicities.append(z.multiplicity)
        curve.residuals.append(z.residual)
    return curve


# -------------------------------------------------------------- thresholds

@dataclass
class ThresholdReport:
    omega: float
    which: str
    lam: complex
    offsets: tuple
    values: tuple
    E_extrapolated: complex
    bounded_coeff: np.ndarray
    sigma_min: float
    resonance: bool


def _columns(pot, lam, branch="minus"):
    """[f1, f2, g1, g2] at x = 0 (unit asymptotic vectors)."""
    fe = free_eigenstructure(lam, pot.omega, side=branch)
    Y0 = np.stack([fe.Xi1, fe.Xi2], axis=1)[None]
    eta = propagate(pot, [lam], Y0, [[1j * fe.xi1, 1j * fe.xi2]], np.array([0.0]))[0, 0]
    return np.concatenate([eta, BB @ eta], axis=1)


def threshold_probe(pot, which="embedded", offsets=(1e-4, 4e-4), tol=1e-3):
    """|E| just below a threshold, extrapolated linearly in the small xi."""
    w = abs(pot.omega)
    th = 1 - w if which == "gap_edge" else 1 + w
    j = 0 if which == "gap_edge" else 1
    lams = [1j * (th - d) for d in offsets]
    S = evans_batch(pot, lams)
    if not all(s.ok for s in S):
        raise EvansError("Evans evaluation failed near the threshold")
    xa, xb = S[0].xi[j], S[1].xi[j]
    Ea, Eb = S[0].E, S[1].E
    E0 = (xb * Ea - xa * Eb) / (xb - xa)
    C = _columns(pot, lams[0])
    C = C / np.linalg.norm(C, axis=0)
    _, sv, vh = np.linalg.svd(C)
    return ThresholdReport(omega=pot.omega, which=which, lam=1j * th, offsets=tuple(offsets),
                           values=(Ea, Eb), E_extrapolated=complex(E0),
                           bounded_coeff=vh[-1].conj(), sigma_min=float(sv[-1] / sv[0]),
                           resonance=bool(abs(E0) < tol))


# ------------------------------------------------------------------- Krein

@dataclass
class KreinResult:
    sign: int
    value: float
    norm2: float


def krein_quadrature(x, Phi, rel=1e-6):
    """Sign of <Phi, i J Phi> by trapezoid quadrature on the grid x."""
    Sig = MAT.Sigma
    dens = np.einsum("ni,ij,nj->n", Phi.conj(), Sig, Phi).real
    val = float(np.trapezoid(dens, x))
    n2 = float(np.trapezoid(np.sum(np.abs(Phi) ** 2, axis=1), x))
    if abs(val) < rel * n2:
        raise EvansError("null signature")
    return KreinResult(sign=int(np.sign(val)), value=val, norm2=n2)


def eigenfunction(pot, lam_star, parity=None, x_max=None, n=4001, branch="minus"):
    """L2 eigenfunction on a symmetric grid from the decaying Jost pair."""
    lam = complex(lam_star)
    if parity is None:
        s = evans_eval(lam, pot=pot, branch=branch)
        parity = "X" if abs(s.scaled("X")) < abs(s.scaled("Xperp")) else "Xperp"
    if parity not in ("X", "Xperp"):
        raise ValueError("parity must be X or Xperp")
    fe = free_eigenstructure(lam, pot.omega, side=branch)
    if min(fe.xi1.imag, fe.xi2.imag) <= 0:
        raise EvansError("eigenfunction needs both channels decaying")
    X = pot.x.max() if x_max is None else x_max
    xp = np.linspace(0.0, X, n)
    Y0 = np.stack([fe.Xi1, fe.Xi2], axis=1)[None]
    q = np.array([1j * fe.xi1, 1j * fe.xi2])
    eta = propagate(pot, [lam], Y0, q[None], xp)[:, 0]          # (n,4,2)
    f = eta * np.exp(np.outer(xp, q))[:, None, :]
    rows = ROWS_X if parity == "X" else ROWS_XP
    A = f[0][rows]
    _, _, vh = np.linalg.svd(A)
    c = vh[-1].conj()
    half = f @ c
    sgn = 1.0 if parity == "X" else -1.0
    left = sgn * half[:0:-1] @ BB.T
    x = np.concatenate([-xp[:0:-1], xp])
    return x, np.concatenate([left, half])


def krein_signature(pot, lam_star, parity=None, **kw):
    x, Phi = eigenfunction(pot, lam_star, parity, **kw)
    return krein_quadrature(x, Phi)


# ------------------------------------------------------ off-axis search

@dataclass
class WindingScan:
    omega: float
    windings: tuple     # (upper, lower) rectangle
    min_abs: float
    evaluations: int

    @property
    def clean(self):
        return all(w == 0 for w in self.windings)


def complex_winding_scan(pot, re=(0.01, 0.59), im=(0.01, 2.5), n_edge=24):
    """Winding of E around re x im and its mirror below the real axis.

    Off-axis eigenvalues come in quadruplets (lambda, -lambda, conj), so
    Re lambda > 0 is enough; the strip |Im| < im[0] keeps real zeros out.
    """
    fn = evans_function(pot, "full", "minus")
    out, vmin, nev = [], np.inf, 0
    for sgn in (1, -1):
        a, b = sorted((sgn * im[0], sgn * im[1]))
        corners = [complex(re[0], a), complex(re[1], a), complex(re[1], b), complex(re[0], b)]
        w, m, k = winding_number(fn, corners, n_edge=n_edge)
        out.append(w)
        vmin = min(vmin, m)
        nev += k
    return WindingScan(omega=pot.omega, windings=tuple(out), min_abs=vmin, evaluations=nev)
