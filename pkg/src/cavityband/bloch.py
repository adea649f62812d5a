"""Bloch eigenproblem of the cos^2 lattice in a plane-wave basis.

The Bloch function psi_q(x) = exp(iqx) sum_n a_n exp(2inx) turns the
Schroedinger equation with potential v cos^2(x) into a tridiagonal problem:

    H[n, n]   = (q + 2n)^2 + v/2
    H[n, n+1] = H[n+1, n] = v/4

Coefficients are real. The atom-light overlap f = <cos^2 x> is
1/2 + (1/2) sum_n a_n a_{n+1}, and by Hellmann-Feynman f = d mu / d v.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import DerivativeUnavailable, TruncationError
from .numerics import derivative_tower

__all__ = [
    "BlochState",
    "OverlapDerivatives",
    "build_hamiltonian",
    "solve_bloch",
    "overlap_f",
    "overlap_derivatives",
    "overlap_derivatives_batch",
    "overlap_table",
    "choose_truncation",
    "band_gap",
    "DEFAULT_R",
    "MAX_R",
]

DEFAULT_R = 16
MAX_R = 256
MU_TOL = 1e-10


def _tridiagonal(q, v, R):
    n = np.arange(-R, R + 1)
    d = (q + 2.0 * n) ** 2 + v / 2.0
    e = np.full(2 * R, v / 4.0)
    return d, e


def build_hamiltonian(q: float, v: float, R: int = DEFAULT_R) -> np.ndarray:
    """Dense (2R+1)x(2R+1) Bloch Hamiltonian for modes n = -R..R."""
    if R < 1:
        raise ValueError("R must be >= 1")
    d, e = _tridiagonal(q, v, R)
    return np.diag(d) + np.diag(e, 1) + np.diag(e, -1)


def _fix_sign(a):
    i = int(np.argmax(np.abs(a)))
    return -a if a[i] < 0 else a


def _free_state(q, band, R):
    # v = 0: pick a single plane wave, ties broken by mode index, so |psi|^2 is
    # uniform and f = 1/2 exactly.
    n = np.arange(-R, R + 1)
    order = np.lexsort((n, (q + 2.0 * n) ** 2))
    k = order[band]
    a = np.zeros(2 * R + 1)
    a[k] = 1.0
    return float((q + 2.0 * n[k]) ** 2), a


def _eig(q, v, band, R, vectors=True):
    if v == 0.0:
        mu, a = _free_state(q, band, R)
        return mu, (a if vectors else None)
    d, e = _tridiagonal(q, v, R)
    if vectors:
        w, z = eigh_tridiagonal(d, e, select="i", select_range=(band, band))
        return float(w[0]), _fix_sign(z[:, 0])
    w = eigh_tridiagonal(d, e, eigvals_only=True, select="i", select_range=(band, band))
    return float(w[0]), None


def _overlap(a):
    return 0.5 + 0.5 * float(np.dot(a[:-1], a[1:]))


@dataclass(frozen=True)
class BlochState:
    """Converged Bloch eigenstate of one band at fixed (q, v).

    ``coeffs[k]`` is a_n for n = k - R.
    """

    q: float
    band: int
    v: float
    coeffs: np.ndarray = field(repr=False)
    mu: float
    truncation: int

    def __post_init__(self):
        self.coeffs.setflags(write=False)

    @property
    def modes(self) -> np.ndarray:
        R = self.truncation
        return np.arange(-R, R + 1)

    @property
    def f(self) -> float:
        return overlap_f(self)

    def kinetic(self) -> float:
        """Per-atom kinetic energy sum_n (q+2n)^2 a_n^2."""
        return float(np.sum((self.q + 2.0 * self.modes) ** 2 * self.coeffs**2))

    def hamiltonian(self) -> np.ndarray:
        return build_hamiltonian(self.q, self.v, self.truncation)

    def residual(self) -> float:
        H = self.hamiltonian()
        return float(np.linalg.norm(H @ self.coeffs - self.mu * self.coeffs))


def solve_bloch(q: float, v: float, band: int = 0, R: int = DEFAULT_R) -> BlochState:
    """Eigenpair number ``band`` (0 = lowest) at (q, v).

    The truncation is doubled from ``R`` until mu changes by less than 1e-10;
    past R = 256 a TruncationError is raised.
    """
    if band < 0 or band >= 2 * R:
        raise ValueError(f"band must be in [0, {2 * R}), got {band}")
    mu, a = _eig(q, v, band, R)
    while True:
        R2 = 2 * R
        if R2 > MAX_R:
            raise TruncationError(f"mu not converged at R={R} for q={q}, v={v}")
        mu2, a2 = _eig(q, v, band, R2)
        if abs(mu2 - mu) < MU_TOL:
            return BlochState(float(q), int(band), float(v), a, mu, int(R))
        mu, a, R = mu2, a2, R2


def overlap_f(state: BlochState) -> float:
    """Period-averaged <cos^2 x> of the state."""
    return _overlap(state.coeffs)


def choose_truncation(q: float, vmax: float, band: int = 0, R: int = DEFAULT_R) -> int:
    """Smallest R (by doubling) whose mu agrees with 2R to 1e-10 at depth vmax.

    Deeper lattices need more modes, so an R valid at the largest |v| of a scan
    is valid for the whole scan.
    """
    return solve_bloch(q, vmax, band, R).truncation


def overlap_table(q, vs, band=0, R=DEFAULT_R, with_mu=False):
    """f (and optionally mu) on an array of depths at fixed truncation R."""
    vs = np.asarray(vs, dtype=float)
    f = np.empty(vs.shape)
    mu = np.empty(vs.shape)
    for idx, v in np.ndenumerate(vs):
        m, a = _eig(q, float(v), band, R)
        f[idx] = _overlap(a)
        mu[idx] = m
    return (f, mu) if with_mu else f


def band_gap(q: float, v: float, band: int = 0, R: int = DEFAULT_R) -> float:
    """Distance from mu_band to the nearest other eigenvalue."""
    if v == 0.0:
        n = np.arange(-R, R + 1)
        w = np.sort((q + 2.0 * n) ** 2)
    else:
        d, e = _tridiagonal(q, v, R)
        lo = max(band - 1, 0)
        w = eigh_tridiagonal(d, e, eigvals_only=True, select="i", select_range=(lo, band + 1))
        band = band - lo
        return float(min(abs(w[i] - w[band]) for i in range(len(w)) if i != band))
    gaps = [abs(w[i] - w[band]) for i in (band - 1, band + 1) if 0 <= i < len(w)]
    return float(min(gaps))


@dataclass(frozen=True)
class OverlapDerivatives:
    """f and its v-derivatives with error estimates.

    ``derivs[k]`` is the k-th derivative (``derivs[0]`` is f itself) and
    ``errors[k]`` its estimated absolute error.
    """

    q: float
    v: float
    band: int
    derivs: tuple
    errors: tuple
    step: float

    @property
    def f(self) -> float:
        return self.derivs[0]

    def _get(self, k, seq):
        return seq[k] if k < len(seq) else None

    d1 = property(lambda s: s._get(1, s.derivs))
    d2 = property(lambda s: s._get(2, s.derivs))
    d3 = property(lambda s: s._get(3, s.derivs))
    d4 = property(lambda s: s._get(4, s.derivs))
    err1 = property(lambda s: s._get(1, s.errors))
    err2 = property(lambda s: s._get(2, s.errors))
    err3 = property(lambda s: s._get(3, s.errors))
    err4 = property(lambda s: s._get(4, s.errors))


MIN_GAP = 1e-8


def _steps(q, vs, band, R):
    # Half the gap to the neighbouring band keeps every stencil point well
    # inside the disc where f is analytic in v.
    gaps = np.array([band_gap(q, float(v), band, R) for v in np.atleast_1d(vs)])
    if np.any(gaps < MIN_GAP):
        bad = np.atleast_1d(vs)[gaps < MIN_GAP]
        raise DerivativeUnavailable(
            f"band gap below {MIN_GAP} at q={q}, v={float(bad[0])!r}; steps would underflow"
        )
    return 0.5 * gaps


def overlap_derivatives_batch(q, vs, band=0, order=4, R=None, func=None):
    """Vectorized derivative tower of f over an array of depths.

    Returns (values, errors), both shaped (order+1, len(vs)).
    ``func`` replaces f(v) for testing; steps still come from the band gap.
    """
    vs = np.atleast_1d(np.asarray(vs, dtype=float))
    if R is None:
        R = choose_truncation(q, float(np.max(np.abs(vs))) + 0.0, band)
    h0 = _steps(q, vs, band, R)
    if func is None:
        def func(x):
            return overlap_table(q, x, band, R)
    return derivative_tower(func, vs, h0, max_order=order)


def overlap_derivatives(q: float, v: float, band: int = 0, order: int = 4, R=None) -> OverlapDerivatives:
    """f(v, q) and its first ``order`` v-derivatives with error estimates.

    Central differences with 4-level Richardson extrapolation. The initial
    step is half the gap to the nearest other band (not a fixed 1e-3: high
    orders at fixed small steps are dominated by roundoff).
    """
    if R is None:
        R = choose_truncation(q, abs(v) + 2.0 * band_gap(q, v, band) + 1.0, band)
    vals, errs = overlap_derivatives_batch(q, [v], band, order, R)
    h0 = float(_steps(q, [v], band, R)[0])
    return OverlapDerivatives(
        float(q), float(v), int(band),
        tuple(float(x) for x in vals[:, 0]),
        tuple(float(x) for x in errs[:, 0]),
        h0,
    )
