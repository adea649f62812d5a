"""Folds of the input-output curve, critical pump strengths and solution-count maps.

The input-output relation n_max(n) = n [1 + d^2], d = (Dc - N U0 f)/kappa,
turns over where

    B(v) = kappa^2 + D^2 - 2 v D N U0 f'(v) = 0,    D = Dc - N U0 f(v),

(v = U0 n). Bistability is born where B has a double root: B = dB/dv = 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from skimage.measure import find_contours

from .bloch import choose_truncation, overlap_derivatives_batch, overlap_table
from .errors import DegenerateWindow, NotFoundError
from .model import SystemParams

__all__ = [
    "CriticalPoint",
    "BifurcationMap",
    "bistability_residual",
    "fold_depths",
    "critical_points_numeric",
    "critical_point_numeric",
    "eta_window",
    "eta_cr_analytic_shallow",
    "kerr_critical_point",
    "bifurcation_map",
    "crossing_counts",
    "ANALYTIC_CONSTANTS",
]

# Prefactor of the shallow-lattice critical pump law. The closed-form analysis
# of the Kerr cubic gives sqrt(128); sqrt(8) stays selectable for comparison.
ANALYTIC_CONSTANTS = {"derived": math.sqrt(128.0), "sqrt8": math.sqrt(8.0)}


def _tower(q, vs, band, order, R):
    vals, errs = overlap_derivatives_batch(q, vs, band, order, R)
    return vals, errs


def _residual_from(v, dc, f, d1, p):
    D = dc - p.nu0 * f
    return p.kappa**2 + D**2 - 2.0 * v * D * p.nu0 * d1


def bistability_residual(v, delta_c, params: SystemParams, q: float, band: int = 0,
                         frozen_f: float | None = None, R: int | None = None):
    """Fold condition B(v) of the input-output curve (units w_R^2).

    ``frozen_f`` replaces f by a constant (f' = 0), the linear-cavity limit.
    Accepts scalar or array v.
    """
    v_arr = np.atleast_1d(np.asarray(v, dtype=float))
    if frozen_f is not None:
        out = _residual_from(v_arr, delta_c, frozen_f, 0.0, params)
    else:
        if R is None:
            R = choose_truncation(q, float(np.max(np.abs(v_arr))) + 5.0, band)
        vals, _ = _tower(q, v_arr, band, 1, R)
        out = _residual_from(v_arr, delta_c, vals[0], vals[1], params)
    return float(out[0]) if np.ndim(v) == 0 else out


def _search_grid(params, v_search, n=1200):
    g = np.geomspace(1e-4, v_search, n)
    return math.copysign(1.0, params.u0) * g


def fold_depths(q: float, delta_c: float, params: SystemParams, band: int = 0,
                v_search: float = 50.0, R: int | None = None) -> np.ndarray:
    """Depths v where the input-output curve at ``delta_c`` turns over."""
    if R is None:
        R = choose_truncation(q, v_search + 5.0, band)
    grid = _search_grid(params, v_search)
    B = bistability_residual(grid, delta_c, params, q, band, R=R)
    roots = []
    for i in np.flatnonzero(np.sign(B[:-1]) * np.sign(B[1:]) < 0):
        roots.append(brentq(lambda x: bistability_residual(x, delta_c, params, q, band, R=R),
                            grid[i], grid[i + 1], xtol=1e-14, rtol=1e-13))
    return np.array(sorted(roots, key=abs))


@dataclass(frozen=True)
class CriticalPoint:
    """Onset of bistability: fold pair merging at (delta_0, eta_cr)."""

    q: float
    delta_0: float
    eta_cr: float
    n_0: float
    v: float
    residuals: tuple = field(default=(0.0, 0.0))


def _cusp_parts(q, v, band, R, order=3):
    vals, _ = _tower(q, [float(v)], band, order, R)
    return vals[:, 0]


def _reduced(v, f1, f2, p):
    # Eliminating Dc from {B = 0, dB/dv = 0} leaves one equation in v.
    D = v * p.nu0 * f1**2 / (2.0 * f1 + v * f2)
    return p.kappa**2 + D**2 - 2.0 * v * D * p.nu0 * f1, D


def _system(x, q, p, band, R):
    v, dc = x
    f, f1, f2, f3 = _cusp_parts(q, v, band, R)
    D = dc - p.nu0 * f
    NU = p.nu0
    B = p.kappa**2 + D**2 - 2.0 * v * D * NU * f1
    Bv = -2.0 * NU * (D * (2.0 * f1 + v * f2) - NU * v * f1**2)
    dD = -NU * f1
    Bvv = -2.0 * NU * (dD * (2.0 * f1 + v * f2) + D * (3.0 * f2 + v * f3) - NU * (f1**2 + 2.0 * v * f1 * f2))
    J = np.array([[Bv, 2.0 * D - 2.0 * v * NU * f1],
                  [Bvv, -2.0 * NU * (2.0 * f1 + v * f2)]])
    return np.array([B, Bv]), J


def _polish(v, dc, q, p, band, R, maxiter=20):
    """Damped Newton on {B, dB/dv} = 0 for (v, Dc)."""
    x = np.array([v, dc], dtype=float)
    F, J = _system(x, q, p, band, R)
    scale = np.array([p.kappa**2, p.kappa**2 / max(abs(v), 1e-12)])
    for _ in range(maxiter):
        if np.all(np.abs(F) <= 1e-12 * scale):
            break
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            break
        t = 1.0
        base = np.linalg.norm(F / scale)
        while t > 1e-4:
            xt = x + t * step
            if xt[0] * x[0] > 0:
                Ft, Jt = _system(xt, q, p, band, R)
                if np.linalg.norm(Ft / scale) < base:
                    break
            t *= 0.5
        else:
            break
        x, F, J = xt, Ft, Jt
    return x, F


def critical_points_numeric(q: float, params: SystemParams, window=None, band: int = 0,
                            v_search: float = 50.0, R: int | None = None):
    """All cusp points (birth of a fold pair) with detuning in ``window``.

    A coarse scan of the reduced one-variable condition seeds a damped Newton
    solve of {B = 0, dB/dv = 0}. ``params.eta`` and ``params.delta_c`` are
    ignored.
    """
    p = params
    if R is None:
        R = choose_truncation(q, v_search + 5.0, band)
    grid = _search_grid(p, v_search, 600)
    vals, _ = _tower(q, grid, band, 2, R)
    r, _ = _reduced(grid, vals[1], vals[2], p)

    def scalar(v):
        f = _cusp_parts(q, v, band, R, order=2)
        return _reduced(v, f[1], f[2], p)[0]

    out = []
    for i in np.flatnonzero(np.sign(r[:-1]) * np.sign(r[1:]) < 0):
        v0 = brentq(scalar, grid[i], grid[i + 1], xtol=1e-14, rtol=1e-13)
        f = _cusp_parts(q, v0, band, R, order=2)
        val, D = _reduced(v0, f[1], f[2], p)
        # a sign change through a pole of D is not a root
        if not abs(val) < 1e-6 * p.kappa**2:
            continue
        dc = D + p.nu0 * f[0]
        (v1, dc1), F = _polish(v0, dc, q, p, band, R)
        if window is not None and not (window[0] <= dc1 <= window[1]):
            continue
        f0 = _cusp_parts(q, v1, band, R, order=1)[0]
        n0 = v1 / p.u0
        eta = math.sqrt(n0 * (p.kappa**2 + (dc1 - p.nu0 * f0) ** 2))
        out.append(CriticalPoint(float(q), float(dc1), eta, n0, float(v1), (float(F[0]), float(F[1]))))
    return sorted(out, key=lambda c: c.eta_cr)


def critical_point_numeric(q: float, params: SystemParams, window=None, band: int = 0,
                           v_search: float = 50.0, R: int | None = None) -> CriticalPoint:
    """Lowest-pump cusp point in the detuning window (see critical_points_numeric)."""
    pts = critical_points_numeric(q, params, window, band, v_search, R)
    if not pts:
        raise NotFoundError(f"no bistability onset in window {window} at q={q}")
    return pts[0]


def eta_window(q: float, delta_c: float, params: SystemParams, band: int = 0,
               v_search: float = 50.0, R: int | None = None):
    """Pump strengths of the fold points at fixed detuning, ascending.

    Returns None when the input-output curve is monotone; two values
    (eta_1, eta_2) in the bistable case, four when the curve folds twice.
    """
    vs = fold_depths(q, delta_c, params, band, v_search, R)
    if len(vs) == 0:
        return None
    if len(vs) == 1:
        raise DegenerateWindow(f"single fold point at q={q}, delta_c={delta_c}")
    Rr = R or choose_truncation(q, float(np.max(np.abs(vs))), band)
    f = overlap_table(q, vs, band, Rr)
    n = vs / params.u0
    eta = params.kappa * np.sqrt(n * (1.0 + ((delta_c - params.nu0 * f) / params.kappa) ** 2))
    return tuple(float(x) for x in np.sort(eta))


def eta_cr_analytic_shallow(q: float, params: SystemParams, constant: str = "derived") -> float:
    """Shallow-lattice critical pump C sqrt(kappa^3 (1-q^2) / (3 sqrt3 N U0^2)).

    ``constant`` selects C: "derived" (sqrt 128, default) or "sqrt8".
    """
    if abs(q) >= 1:
        return 0.0
    C = ANALYTIC_CONSTANTS[constant]
    p = params
    return C * math.sqrt(p.kappa**3 * (1.0 - q * q) / (3.0 * math.sqrt(3.0) * p.n_atoms * p.u0**2))


def kerr_critical_point(params: SystemParams):
    """Closed-form q = 0 onset with f linearized as 1/2 - v/16.

    Returns (delta_0, eta_0, n_0).
    """
    p = params
    k = p.kappa
    delta0 = p.nu0 / 2.0 - math.sqrt(3.0) * k
    eta0 = math.sqrt(128.0 * k**3 / (3.0 * math.sqrt(3.0) * p.n_atoms * p.u0**2))
    n0 = 32.0 * k / (math.sqrt(3.0) * p.n_atoms * p.u0**2)
    return delta0, eta0, n0


def crossing_counts(n_max_curve, levels) -> np.ndarray:
    """Number of times a sampled input-output curve crosses each level."""
    y = np.asarray(n_max_curve, dtype=float)
    out = []
    for L in np.atleast_1d(levels):
        s = np.sign(y - L)
        nz = s[s != 0]
        out.append(int(np.count_nonzero(nz[:-1] != nz[1:])))
    return np.array(out)


@dataclass(frozen=True)
class BifurcationMap:
    """Solution counts on a (eta, Delta_c) grid.

    ``counts[i, j]`` belongs to ``eta_grid[i]`` and ``delta_grid[j]``.
    ``folds`` is a list of polylines, each an (m, 2) array of (delta_c, eta).
    ``cusps`` is a list of (delta_c, eta) points where two fold lines meet.
    """

    q: float
    eta_grid: np.ndarray
    delta_grid: np.ndarray
    counts: np.ndarray
    folds: list
    cusps: list


class _Curves:
    """Input-output curves for many detunings sharing one f table."""

    def __init__(self, q, params, band, n_hi, n_points, R=None):
        self.p = params
        self.n = np.linspace(0.0, n_hi, n_points)
        v = params.u0 * self.n
        if R is None:
            R = choose_truncation(q, float(v[-1]), band)
        self.f = overlap_table(q, v, band, R)

    def curve(self, dc):
        p = self.p
        return self.n * (1.0 + ((dc - p.nu0 * self.f) / p.kappa) ** 2)

    def folds(self, dc):
        """n_max values at the turning points, parabola-refined."""
        y = self.curve(dc)
        dy = np.diff(y)
        idx = np.flatnonzero(dy[:-1] * dy[1:] < 0) + 1
        out = []
        for i in idx:
            a, b, c = y[i - 1], y[i], y[i + 1]
            den = a - 2 * b + c
            t = 0.5 * (a - c) / den if den != 0 else 0.0
            out.append(b - 0.25 * (a - c) * t)
        return np.array(out)

    def count(self, dc, level):
        return int(crossing_counts(self.curve(dc), [level])[0])


def bifurcation_map(q: float, params: SystemParams, delta_grid, eta_grid, band: int = 0,
                    n_points: int = 20000, R: int | None = None) -> BifurcationMap:
    """Solution-count map over (eta, Delta_c).

    Counts are crossings of the input-output curve n_max(n) with the level
    eta^2/kappa^2; the roots of G are in one-to-one correspondence with those
    crossings, and one f table serves every grid node. Fold polylines come from
    marching squares on the count grid and are refined once: vertices on a
    fixed-detuning edge snap to the exact fold pump, vertices on a fixed-pump
    edge are bisected in detuning.
    """
    dg = np.asarray(delta_grid, dtype=float)
    eg = np.asarray(eta_grid, dtype=float)
    if np.any(np.diff(dg) <= 0) or np.any(np.diff(eg) <= 0):
        raise ValueError("grids must be strictly increasing")
    p = params
    n_hi = 1.05 * (eg[-1] / p.kappa) ** 2
    cv = _Curves(q, p, band, n_hi, n_points, R)
    levels = (eg / p.kappa) ** 2
    counts = np.empty((len(eg), len(dg)), dtype=int)
    fold_eta = []
    for j, dc in enumerate(dg):
        counts[:, j] = crossing_counts(cv.curve(dc), levels)
        fold_eta.append(p.kappa * np.sqrt(np.maximum(cv.folds(dc), 0.0)))

    folds = []
    for lev in (2, 4):
        if counts.max() <= lev - 1 or counts.min() >= lev + 1:
            continue
        for line in find_contours(counts.astype(float), lev):
            pts = []
            for r, c in line:
                pts.append(_refine_vertex(r, c, eg, dg, fold_eta, cv, p))
            folds.append(np.array(pts))
    cusps = _cusps(dg, cv, p)
    return BifurcationMap(float(q), eg, dg, counts, folds, cusps)


def _refine_vertex(r, c, eg, dg, fold_eta, cv, p):
    ri, ci = int(round(r)), int(round(c))
    if abs(c - ci) < 1e-9:
        # vertical edge: exact fold pump in this detuning column
        lo, hi = eg[int(math.floor(r))], eg[min(int(math.floor(r)) + 1, len(eg) - 1)]
        cand = [e for e in fold_eta[ci] if lo <= e <= hi]
        eta = cand[0] if cand else np.interp(r, np.arange(len(eg)), eg)
        return (dg[ci], float(eta))
    # horizontal edge: bisect the detuning where the count changes
    eta = eg[ri]
    level = (eta / p.kappa) ** 2
    j = int(math.floor(c))
    a, b = dg[j], dg[min(j + 1, len(dg) - 1)]
    ca = cv.count(a, level)
    for _ in range(40):
        m = 0.5 * (a + b)
        if cv.count(m, level) == ca:
            a = m
        else:
            b = m
    return (0.5 * (a + b), float(eta))


def _cusps(dg, cv, p):
    """Detunings where the number of turning points changes, bisected."""
    nf = [len(cv.folds(dc)) for dc in dg]
    out = []
    for j in range(len(dg) - 1):
        if nf[j] == nf[j + 1]:
            continue
        a, b = dg[j], dg[j + 1]
        na = nf[j]
        for _ in range(50):
            m = 0.5 * (a + b)
            if len(cv.folds(m)) == na:
                a = m
            else:
                b = m
        many = a if len(cv.folds(a)) > len(cv.folds(b)) else b
        few = b if many == a else a
        fm, ff = cv.folds(many), cv.folds(few)
        # the merging pair is the one not matched in the other column; a
        # genuine cusp has both members at the same height, a turning point
        # leaving the tabulated range does not
        left = list(fm)
        for x in ff:
            k = int(np.argmin(np.abs(np.array(left) - x)))
            left.pop(k)
        if len(left) == 2 and abs(left[0] - left[1]) <= 1e-3 * max(abs(left[0]), abs(left[1])):
            eta = p.kappa * math.sqrt(max(float(np.mean(left)), 0.0))
            out.append((float(0.5 * (a + b)), eta))
    return out
