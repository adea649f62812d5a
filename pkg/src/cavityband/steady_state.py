"""Self-consistent steady-state photon numbers.

The cavity field is slaved to the atoms, so for a Bloch state with overlap f
the photon number is n = eta^2 / (kappa^2 + (Delta_c - N U0 f)^2), and the
lattice depth is v = U0 n. Multiplying through gives the state function

    G(v) = v kappa^2 + v (Delta_c - N U0 f(v, q))^2 - eta^2 U0,

whose zeros on the segment between 0 and U0 n_max are the steady states.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .bloch import BlochState, _eig, _overlap, choose_truncation, overlap_table, DEFAULT_R
from .errors import NumericalError, ParameterError
from .model import SystemParams, check_quasi_momentum, validate_params

__all__ = [
    "PhotonBranch",
    "BranchSet",
    "LineshapeResult",
    "state_function_G",
    "find_branches",
    "find_branches_red_detuned",
    "lineshape_sweep",
    "hysteresis_traces",
    "input_output_curve",
    "total_energy",
    "N_GRID",
]

N_GRID = 4000
DEDUP_RTOL = 1e-6


@dataclass(frozen=True)
class PhotonBranch:
    """One self-consistent steady state."""

    n_ph: float
    v: float
    f: float
    mu: float
    energy_total: float
    phase: float
    state: BlochState = field(repr=False, compare=False)

    def residual(self, params: SystemParams) -> float:
        """Self-consistency residual n (kappa^2 + (Dc - N U0 f)^2) - eta^2."""
        p = params
        return self.n_ph * (p.kappa**2 + (p.delta_c - p.nu0 * self.f) ** 2) - p.eta**2


@dataclass(frozen=True)
class BranchSet:
    """All steady states at one quasi-momentum, sorted by photon number."""

    q: float
    params: SystemParams
    band: int
    branches: tuple
    truncation: int

    @property
    def count(self) -> int:
        return len(self.branches)

    @property
    def n_ph(self) -> np.ndarray:
        return np.array([b.n_ph for b in self.branches])

    @property
    def energies(self) -> np.ndarray:
        return np.array([b.energy_total for b in self.branches])


def detuning_ratio(f, params: SystemParams):
    """d = (Delta_c - N U0 f)/kappa; the field phase is arctan(d)."""
    return (params.delta_c - params.nu0 * f) / params.kappa


def total_energy(kinetic: float, f: float, params: SystemParams) -> float:
    """Reduced energy N sum (q+2n)^2 a_n^2 - (eta^2/kappa) arctan(d)."""
    p = params
    return p.n_atoms * kinetic - p.eta**2 / p.kappa * math.atan(detuning_ratio(f, p))


def _G(v, f, p):
    return v * p.kappa**2 + v * (p.delta_c - p.nu0 * f) ** 2 - p.eta**2 * p.u0


def state_function_G(v: float, q: float, params: SystemParams, band: int = 0, R: int | None = None) -> float:
    """State function G(v) in w_R^2 E_R; zero at self-consistent depths."""
    if R is None:
        R = choose_truncation(q, abs(v), band)
    mu, a = _eig(q, float(v), band, R)
    return _G(v, _overlap(a), params)


def _bracket_roots(g, grid, G):
    """Brackets of every sign change of sampled G, plus pairs hidden in extrema.

    A pair of close roots may sit between two samples of equal sign. Every
    sampled interior extremum is polished with a bounded minimization; if the
    true extremum crosses zero the two roots get their own brackets.
    """
    s = np.sign(G)
    brackets = []
    exact = [grid[i] for i in np.flatnonzero(G == 0.0)]
    for i in np.flatnonzero(s[:-1] * s[1:] < 0):
        brackets.append((grid[i], grid[i + 1]))
    dG = np.diff(G)
    for i in np.flatnonzero(dG[:-1] * dG[1:] < 0) + 1:
        if s[i - 1] != s[i] or s[i] != s[i + 1] or s[i] == 0:
            continue
        sign = s[i]
        lo, hi = grid[i - 1], grid[i + 1]
        res = minimize_scalar(lambda x: sign * g(x), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-14 * max(abs(lo), abs(hi), 1e-300)})
        xe = float(res.x)
        if sign * g(xe) < 0:
            brackets.append((lo, xe))
            brackets.append((xe, hi))
    return brackets, exact


def _dedup(vs):
    out = []
    for v in sorted(vs):
        if out and abs(v - out[-1]) <= DEDUP_RTOL * max(abs(v), abs(out[-1])):
            continue
        out.append(v)
    return out


def _solve_roots(g, v_lo, v_hi, n_grid):
    grid = np.linspace(v_lo, v_hi, n_grid)
    G = np.array([g(x) for x in grid])
    brackets, exact = _bracket_roots(g, grid, G)
    scale = max(abs(v_lo), abs(v_hi))
    roots = list(exact)
    for a, b in brackets:
        roots.append(brentq(g, a, b, xtol=1e-15 * scale, rtol=1e-13, maxiter=500))
    return _dedup(roots)


def _branch_from(q, v, a, mu, band, params):
    R = len(a) // 2
    state = BlochState(float(q), int(band), float(v), a, float(mu), R)
    f = _overlap(a)
    return PhotonBranch(
        n_ph=abs(v / params.u0),
        v=float(v),
        f=f,
        mu=float(mu),
        energy_total=total_energy(state.kinetic(), f, params),
        phase=math.atan(detuning_ratio(f, params)),
        state=state,
    )


def find_branches(q: float, params: SystemParams, band: int = 0, R: int | None = None,
                  n_grid: int = N_GRID, _any_q: bool = False) -> BranchSet:
    """All steady states at quasi-momentum ``q``.

    Scans v on [0, U0 n_max] (or [U0 n_max, 0] when U0 < 0) with ``n_grid``
    points, brackets sign changes of G, refines each root with Brent's method
    to relative 1e-12 or better, and deduplicates roots closer than 1e-6
    relative.
    """
    p = validate_params(params)
    # _any_q admits q just outside the zone for periodicity checks
    q = float(q) if _any_q else check_quasi_momentum(q)
    v_end = p.u0 * p.n_max
    if R is None:
        R = choose_truncation(q, v_end, band)
    if p.eta == 0:
        mu, a = _eig(q, 0.0, band, R)
        return BranchSet(q, p, band, (_branch_from(q, 0.0, a, mu, band, p),), R)

    def g(v):
        return _G(v, _overlap(_eig(q, float(v), band, R)[1]), p)

    lo, hi = sorted((0.0, v_end))
    roots = _solve_roots(g, lo, hi, n_grid)
    if not roots:
        raise NumericalError(f"no steady state found at q={q} for {p}")
    branches = []
    for v in roots:
        mu, a = _eig(q, float(v), band, R)
        branches.append(_branch_from(q, v, a, mu, band, p))
    branches.sort(key=lambda b: b.n_ph)
    return BranchSet(q, p, band, tuple(branches), R)


def find_branches_red_detuned(q: float, params: SystemParams, band: int = 0, R: int | None = None,
                              n_grid: int = N_GRID) -> BranchSet:
    """Steady states for U0 < 0 solved on the mirrored positive-depth problem.

    A depth -w lattice is the depth w lattice shifted by pi/2 and lowered by w,
    so f(-w) = 1 - f(w), mu(-w) = mu(w) - w and a_n(-w) = (-1)^n a_n(w). The
    state function becomes w kappa^2 + w (Dc + N|U0| - N|U0| f(w))^2 - eta^2 |U0|.
    """
    p = validate_params(params)
    if p.u0 >= 0:
        raise ParameterError(["u0 must be negative for the red-detuned path"])
    q = check_quasi_momentum(q)
    absu = -p.u0
    w_end = absu * p.n_max
    if R is None:
        R = choose_truncation(q, w_end, band)
    if p.eta == 0:
        mu, a = _eig(q, 0.0, band, R)
        return BranchSet(q, p, band, (_branch_from(q, 0.0, a, mu, band, p),), R)
    shifted = p.delta_c + p.n_atoms * absu

    def g(w):
        f = _overlap(_eig(q, float(w), band, R)[1])
        return w * p.kappa**2 + w * (shifted - p.n_atoms * absu * f) ** 2 - p.eta**2 * absu

    roots = _solve_roots(g, 0.0, w_end, n_grid)
    if not roots:
        raise NumericalError(f"no steady state found at q={q} for {p}")
    parity = (-1.0) ** np.arange(-R, R + 1)
    branches = []
    for w in roots:
        mu, a = _eig(q, float(w), band, R)
        a_neg = a * parity
        i = int(np.argmax(np.abs(a_neg)))
        if a_neg[i] < 0:
            a_neg = -a_neg
        branches.append(_branch_from(q, -w, a_neg, mu - w, band, p))
    branches.sort(key=lambda b: b.n_ph)
    return BranchSet(q, p, band, tuple(branches), R)


def _stable_candidates(bs: BranchSet):
    # On an S-shaped response the outer and every other branch are the stable
    # ones; near a boundary (even count) every branch is admissible.
    n = bs.n_ph
    if len(n) % 2 == 1:
        return n[::2]
    return n


def hysteresis_traces(sets):
    """Photon number followed by an upward and a downward detuning sweep.

    The upward sweep starts on the lowest branch, the downward one on the
    highest; each step keeps the candidate nearest in n_ph to the previous
    value, which becomes a jump when the followed branch has disappeared.
    """
    def follow(seq, start):
        out = []
        prev = None
        for bs in seq:
            cand = _stable_candidates(bs)
            if prev is None:
                cur = cand[0] if start == "low" else cand[-1]
            else:
                cur = cand[int(np.argmin(np.abs(cand - prev)))]
            out.append(float(cur))
            prev = cur
        return np.array(out)

    up = follow(sets, "low")
    down = follow(sets[::-1], "high")[::-1]
    return up, down


@dataclass(frozen=True)
class LineshapeResult:
    delta_grid: np.ndarray
    sets: tuple
    up_trace: np.ndarray
    down_trace: np.ndarray

    @property
    def counts(self) -> np.ndarray:
        return np.array([s.count for s in self.sets])


def lineshape_sweep(params: SystemParams, q: float, band: int, delta_grid, workers: int | None = None,
                    R: int | None = None, solver=None) -> LineshapeResult:
    """Branch sets over a sorted detuning grid plus hysteresis traces.

    ``solver`` defaults to find_branches; pass find_branches_red_detuned to
    use the mirrored path for U0 < 0.
    """
    solver = solver or find_branches
    grid = np.asarray(delta_grid, dtype=float)
    if np.any(np.diff(grid) < 0):
        raise ParameterError(["delta_grid must be sorted ascending"])
    p = validate_params(params)
    if R is None:
        R = choose_truncation(q, abs(p.u0) * p.n_max, band)

    def one(dc):
        return solver(q, p.with_(delta_c=float(dc)), band, R=R)

    if workers == 1:
        sets = [one(dc) for dc in grid]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            sets = list(ex.map(one, grid))
    up, down = hysteresis_traces(sets)
    return LineshapeResult(grid, tuple(sets), up, down)


def input_output_curve(params: SystemParams, q: float, band: int, n_ph_grid, overlap=None,
                       R: int | None = None):
    """Parametric input-output relation n_max(n_ph) = n_ph [1 + d(f)^2].

    ``params.eta`` is ignored. ``overlap`` optionally replaces f: a constant
    or a vectorized callable of the depth v.

    Returns (n_max, n_ph) arrays.
    """
    n = np.asarray(n_ph_grid, dtype=float)
    v = params.u0 * n
    if overlap is None:
        if R is None:
            R = choose_truncation(q, float(v[np.argmax(np.abs(v))]) if v.size else 0.0, band)
        f = overlap_table(q, v, band, R)
    elif callable(overlap):
        f = np.asarray(overlap(v), dtype=float) * np.ones_like(v)
    else:
        f = np.full_like(v, float(overlap))
    d = (params.delta_c - params.nu0 * f) / params.kappa
    return n * (1.0 + d**2), n
