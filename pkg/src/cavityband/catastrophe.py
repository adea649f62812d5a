"""Cusp and swallowtail points of the steady-state equation.

With frequencies rescaled by kappa the state function is

    Phi(v) = v [X + (D - f(v))^2] - Y,   D = Dc/(N U0),  X = 1/(N U0)^2,

up to an overall factor (N U0)^2. Writing h(v) = v (D - f)^2, a swallowtail
needs Phi' = Phi'' = Phi''' = 0:

    X = -h'(v) = -[(D - f)^2 - 2 v f' (D - f)]
    h''(v) = 0   <=>  D = D2 = (2 f f' + v (f f'' + f'^2)) / (2 f' + v f'')
    h'''(v) = 0  <=>  D = D3 = (3 f f'' + 3 f'^2 + v (3 f' f'' + f f''')) / (3 f'' + v f''')

and a butterfly additionally h''''(v) = 0:

    D = D4 = (12 f' f'' + 4 f f''' + v (4 f' f''' + f f'''' + 3 f''^2)) / (4 f''' + v f'''')

These conditions involve only (v, q), so the threshold q_sw does not depend
on N or kappa. The public functions take and return w_R-unit parameters
(with eta and Delta_c also reported over kappa).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .bloch import band_gap, choose_truncation, overlap_derivatives_batch, overlap_table
from .errors import DerivativeUnavailable, InconclusiveError, NotFoundError
from .model import SystemParams
from .numerics import derivative_tower

__all__ = [
    "CuspCoordinates",
    "SwallowtailPoint",
    "ButterflyResult",
    "TransversalityResult",
    "cusp_reduce_shallow",
    "swallowtail_conditions",
    "swallowtail_scan",
    "find_q_sw",
    "butterfly_check",
    "transversality_rank_check",
    "matrix_rank",
    "V_GRID",
]

V_GRID = (1e-3, 50.0, 2000)


@dataclass(frozen=True)
class CuspCoordinates:
    """Shallow-lattice cubic v^3 + b1 v^2 + b2 v + b3 and its cusp controls.

    With s = v + b1/3 the cubic becomes s^3 + c2 s + c1.
    """

    b1: float
    b2: float
    b3: float
    c1: float
    c2: float

    @property
    def shift(self) -> float:
        return self.b1 / 3.0

    def s_of(self, v):
        return np.asarray(v) + self.shift

    def roots(self) -> np.ndarray:
        """Real roots in v, ascending."""
        r = np.roots([1.0, self.b1, self.b2, self.b3])
        real = r[np.abs(r.imag) <= 1e-9 * np.maximum(1.0, np.abs(r.real))].real
        return np.sort(real)

    def three_roots(self) -> bool:
        """Three real roots: negative discriminant 4 c2^3 + 27 c1^2 < 0."""
        return 4.0 * self.c2**3 + 27.0 * self.c1**2 < 0


def cusp_reduce_shallow(params: SystemParams, q: float = 0.0) -> CuspCoordinates:
    """Cubic form of the q = 0 state equation with f = 1/2 - v/16.

    Coefficients (v in E_R, frequencies in w_R):
        b1 = 32 Dc/(N U0) - 16
        b2 = 64 (4 kappa^2 + (N U0 - 2 Dc)^2) / (N U0)^2
        b3 = -256 eta^2 U0 / (N U0)^2
    With kappa = U0 = 1 these are the kappa-rescaled expressions.
    """
    if q != 0:
        raise ValueError("the shallow cusp reduction is defined at q = 0")
    p = params
    nu = p.nu0
    b1 = 32.0 * p.delta_c / nu - 16.0
    b2 = 64.0 * (4.0 * p.kappa**2 + (nu - 2.0 * p.delta_c) ** 2) / nu**2
    b3 = -256.0 * p.eta**2 * p.u0 / nu**2
    c2 = b2 - b1**2 / 3.0
    c1 = b3 - b1 * b2 / 3.0 + 2.0 * b1**3 / 27.0
    return CuspCoordinates(b1, b2, b3, c1, c2)


def _cond_x(v, f, f1, D):
    u = D - f
    return -(u * u - 2.0 * v * f1 * u)


def _cond_d2(v, f, f1, f2):
    return (2 * f * f1 + v * (f * f2 + f1 * f1)) / (2 * f1 + v * f2)


def _cond_d3(v, f, f1, f2, f3):
    return (3 * f * f2 + 3 * f1 * f1 + v * (3 * f1 * f2 + f * f3)) / (v * f3 + 3 * f2)


def _cond_d4(v, f, f1, f2, f3, f4):
    return (12 * f1 * f2 + 4 * f * f3 + v * (4 * f1 * f3 + f * f4 + 3 * f2 * f2)) / (v * f4 + 4 * f3)


def _conditions(v, t):
    f, f1, f2, f3, f4 = t
    D = _cond_d2(v, f, f1, f2)
    D3 = _cond_d3(v, f, f1, f2, f3)
    D4 = _cond_d4(v, f, f1, f2, f3, f4)
    X = _cond_x(v, f, f1, D)
    return np.array([D, X, D - D3, D4 - D])


def swallowtail_conditions(v, vals, errs):
    """Evaluate (D, X, residual3, residual4) and first-order error bounds.

    residual3 is D2 - D3 (zero on a swallowtail), residual4 is
    D4 - D2 (zero on a butterfly). Errors sum the absolute changes caused
    by shifting each derivative by its own error estimate.
    """
    vals = np.asarray(vals, dtype=float)
    errs = np.asarray(errs, dtype=float)
    base = _conditions(v, vals)
    err = np.zeros_like(base)
    for k in range(5):
        if errs[k] == 0:
            continue
        t = vals.copy()
        t[k] += errs[k]
        err += np.abs(_conditions(v, t) - base)
    return base, err


@dataclass(frozen=True)
class SwallowtailPoint:
    """A swallowtail of the state equation and its physical coordinates.

    Scaled coordinates: ``delta_over_NU0`` = Dc/(N U0), ``inv_NU0_sq`` =
    kappa^2/(N U0)^2. Physical ones for the given ``n_atoms`` and ``kappa``
    (w_R): ``u0`` (w_R), ``delta_c`` (w_R), ``eta`` (units of kappa).
    """

    q: float
    v: float
    delta_over_NU0: float
    inv_NU0_sq: float
    eta: float
    residual3: float
    err3: float
    residual4: float
    err4: float
    n_atoms: float
    kappa: float
    u0: float
    delta_c: float
    n_ph: float
    f: float
    inconclusive: bool = False
    tower: tuple = field(default=(), repr=False, compare=False)

    @property
    def delta_c_over_kappa(self) -> float:
        return self.delta_c / self.kappa

    def params(self) -> SystemParams:
        return SystemParams(self.kappa, self.n_atoms, self.u0, self.eta * self.kappa, self.delta_c)


def _physical(q, v, vals, errs, n_atoms, kappa):
    (D, X, r3, r4), (eD, eX, e3, e4) = swallowtail_conditions(v, vals, errs)
    f = float(vals[0])
    nu_k = 1.0 / math.sqrt(X)  # N U0 / kappa
    u0 = kappa * nu_k / n_atoms
    dc = float(D * nu_k * kappa)
    eta_k = math.sqrt(v * (1.0 + (D - f) ** 2 / X) / u0)
    return SwallowtailPoint(
        q=float(q), v=float(v), delta_over_NU0=float(D), inv_NU0_sq=float(X), eta=eta_k,
        residual3=float(r3), err3=float(e3), residual4=float(r4), err4=float(e4),
        n_atoms=float(n_atoms), kappa=float(kappa), u0=u0, delta_c=dc, n_ph=v / u0, f=f,
        # X's sign decides physicality; when its error swamps it, flag the point
        inconclusive=bool(eX >= abs(X)),
        tower=(tuple(float(x) for x in vals), tuple(float(x) for x in errs)),
    )


def _grid(v_grid):
    lo, hi, n = v_grid
    return np.geomspace(lo, hi, int(n))


def swallowtail_scan(q: float, n_atoms: float = 100.0, kappa: float = 1.0, band: int = 0,
                     v_grid=V_GRID, keep_unphysical: bool = False):
    """Swallowtail points of the band at quasi-momentum q.

    Zeros of D2 - D3 are bracketed on a log-spaced v grid and refined with
    Brent's method. A sign change through a pole is rejected: there the
    converged value exceeds ten times its propagated error, or the error is
    itself comparable to D.
    D follows from the second-derivative condition and X from the first; only
    X > 0 is physical (unless ``keep_unphysical``). ``n_atoms`` and ``kappa``
    only enter the physical coordinates.
    """
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    vs = _grid(v_grid)
    R = choose_truncation(q, vs[-1] + 2.0 * band_gap(q, vs[-1], band) + 1.0, band)
    vals, errs = overlap_derivatives_batch(q, vs, band, 4, R)
    r3 = _conditions(vs, vals)[2]

    def r3_at(v):
        t, _ = overlap_derivatives_batch(q, [v], band, 4, R)
        return float(_conditions(v, t[:, 0])[2])

    out = []
    finite = np.isfinite(r3)
    for i in np.flatnonzero(finite[:-1] & finite[1:] & (np.sign(r3[:-1]) * np.sign(r3[1:]) < 0)):
        v0 = brentq(r3_at, vs[i], vs[i + 1], xtol=1e-15, rtol=1e-14)
        t, e = overlap_derivatives_batch(q, [v0], band, 4, R)
        (D, X, r, _), (_, _, er, _) = swallowtail_conditions(v0, t[:, 0], e[:, 0])
        # the zero tolerance is the propagated error; a sign change through a
        # pole of the third-derivative condition converges to a huge value,
        # far beyond the residuals at the bracket ends
        bracket = max(abs(r3[i]), abs(r3[i + 1]))
        if not (abs(r) <= 10.0 * er + 1e-12 * max(1.0, abs(D)) and abs(r) <= bracket):
            continue
        if X <= 0 and not keep_unphysical:
            continue
        if X <= 0:
            out.append((v0, D, X))
            continue
        out.append(_physical(q, v0, t[:, 0], e[:, 0], n_atoms, kappa))
    return out


def find_q_sw(window=(0.4, 0.7), n_atoms: float = 100.0, kappa: float = 1.0, tol: float = 1e-3,
              band: int = 0, v_grid=V_GRID) -> float:
    """Smallest q at which a physical swallowtail exists, by bisection."""
    lo, hi = window
    if not 0 < lo < hi < 1:
        raise ValueError("window must satisfy 0 < lo < hi < 1")

    def has(q):
        return len(swallowtail_scan(q, n_atoms, kappa, band, v_grid)) > 0

    if has(lo):
        raise NotFoundError(f"swallowtails already exist at q={lo}", reason="not-found-below")
    if not has(hi):
        raise NotFoundError(f"no swallowtail in window {window}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if has(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class ButterflyResult:
    residual: float
    error: float
    verdict: str


def _tower_at(point, tower):
    if tower is not None:
        vals, errs = tower(point.v)
        return np.asarray(vals, dtype=float), np.asarray(errs, dtype=float)
    if point.tower:
        return np.array(point.tower[0]), np.array(point.tower[1])
    vals, errs = overlap_derivatives_batch(point.q, [point.v], 0, 4)
    return vals[:, 0], errs[:, 0]


def butterfly_check(point: SwallowtailPoint, tower=None, vanish_tol: float = 1e-6) -> ButterflyResult:
    """Does the fourth derivative condition also hold at the point?

    Evaluates D4 - D2 with its propagated error. Verdict "no butterfly"
    when |residual| > 3 error; "butterfly" when the residual vanishes within
    an error that is itself below ``vanish_tol`` (relative to max(1, |D|)).
    Otherwise the question cannot be decided and InconclusiveError is raised.

    ``tower`` optionally maps v to (values, errors) of f..f'''' (test hook).
    """
    vals, errs = _tower_at(point, tower)
    (D, _, _, r4), (_, _, _, e4) = swallowtail_conditions(point.v, vals, errs)
    if abs(r4) > 3.0 * e4:
        return ButterflyResult(float(r4), float(e4), "no butterfly")
    if e4 <= vanish_tol * max(1.0, abs(D)):
        return ButterflyResult(float(r4), float(e4), "butterfly")
    raise InconclusiveError(f"residual4 {r4:.3e} within its error {e4:.3e}")


@dataclass(frozen=True)
class TransversalityResult:
    rank: int
    singular_values: np.ndarray
    matrix: np.ndarray
    z: np.ndarray


def matrix_rank(M, rel_tol: float = 1e-6):
    """Rank after scaling rows to unit norm; singular values > rel_tol * largest."""
    M = np.asarray(M, dtype=float)
    norms = np.linalg.norm(M, axis=1)
    norms[norms == 0] = 1.0
    s = np.linalg.svd(M / norms[:, None], compute_uv=False)
    return int(np.sum(s > rel_tol * s[0])), s


def transversality_rank_check(point: SwallowtailPoint, unfolding=None, band: int = 0) -> TransversalityResult:
    """Rank of the 4x4 matrix of the swallowtail transversality condition.

    Rows are the Jacobian-ideal basis {v^4, v^3 + (g5/(4 g4)) v^4} of the
    germ g(v) = F(v0 + v) - F(v0) and the Taylor coefficients (orders 1..4)
    of the two unfolding directions dF/dU0 and dF/dDc, all in kappa units
    at fixed N. ``unfolding`` may replace the 2x4 unfolding block (test hook).
    """
    q, v0 = point.q, point.v
    N = point.n_atoms
    dc = point.delta_c / point.kappa
    nu = 1.0 / math.sqrt(point.inv_NU0_sq)
    try:
        R = choose_truncation(q, v0 + 2.0 * band_gap(q, v0, band) + 1.0, band)
        h0 = 0.5 * band_gap(q, v0, band, R)
    except Exception as exc:  # pragma: no cover - solver failure path
        raise InconclusiveError(f"derivatives unavailable: {exc}") from exc
    if h0 < 1e-8:
        raise InconclusiveError("band gap too small for derivatives")

    def f_of(x):
        return overlap_table(q, x, band, R)

    def F(x):
        return x * (1.0 + (dc - nu * f_of(x)) ** 2)

    def phi_u(x):
        return -2.0 * N * x * f_of(x) * (dc - nu * f_of(x))

    def phi_d(x):
        return 2.0 * x * (dc - nu * f_of(x))

    try:
        if unfolding is None:
            z = []
            for phi in (phi_u, phi_d):
                vals, _ = derivative_tower(phi, [v0], h0, max_order=4)
                z.append([vals[j, 0] / math.factorial(j) for j in range(1, 5)])
            z = np.array(z)
        else:
            z = np.asarray(unfolding, dtype=float)
        g4 = derivative_tower(F, [v0], h0, max_order=4)[0][4, 0]

        def F4(x):
            return derivative_tower(F, x, h0 / 2.0, max_order=4)[0][4]

        g5 = derivative_tower(F4, [v0], h0 / 2.0, max_order=1)[0][1, 0]
    except DerivativeUnavailable as exc:
        raise InconclusiveError(str(exc)) from exc
    ideal = np.array([[0.0, 0.0, 0.0, 1.0], [0.0, 0.0, 1.0, g5 / (4.0 * g4)]])
    M = np.vstack([ideal, z])
    rank, s = matrix_rank(M)
    return TransversalityResult(rank, s, M, z)
