"""Energy-vs-quasi-momentum diagrams of the self-consistent band.

Two routes to the same stationary states:

- Method 2 (``find_branches``): solve the Bloch problem at fixed depth and
  close the loop through the photon-number equation.
- Method 1 (``method1_extremize``): extremize the reduced energy

      E[a] = N sum_n (q+2n)^2 a_n^2 - (eta^2/kappa) arctan(d(f[a]))

  directly over real coefficients on the unit sphere.

Their agreement is checked by ``cross_validate``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, linear_sum_assignment, minimize_scalar

from .bloch import BlochState, _eig, _overlap, build_hamiltonian, choose_truncation
from .errors import ExtremizationFailure, NotFoundError, ValidationFailure
from .model import SystemParams, validate_params
from .steady_state import BranchSet, PhotonBranch, _G, detuning_ratio, find_branches, total_energy

__all__ = [
    "BandPoint",
    "BandDiagram",
    "Extremum",
    "LoopEndpoint",
    "energy_of_branch",
    "energy_of_coeffs",
    "method1_extremize",
    "band_sweep",
    "cross_validate",
    "loop_endpoints",
    "edge_slopes",
]


def _coupling(R):
    # matrix of cos^2 x in the plane-wave basis
    n = 2 * R + 1
    return 0.5 * np.eye(n) + 0.25 * (np.eye(n, k=1) + np.eye(n, k=-1))


def energy_of_coeffs(q: float, a, params: SystemParams) -> float:
    """Reduced energy functional evaluated on (not necessarily normalized) a."""
    a = np.asarray(a, dtype=float)
    R = len(a) // 2
    n = np.arange(-R, R + 1)
    kin = float(np.sum((q + 2.0 * n) ** 2 * a**2))
    f = float(a @ _coupling(R) @ a)
    return total_energy(kin, f, params)


def energy_of_branch(branch: PhotonBranch, state: BlochState, params: SystemParams):
    """Total reduced energy of a branch and its chemical potential.

    mu is recomputed as kinetic + v f, i.e. <psi|H|psi> for the state.

    Returns (energy_total, mu).
    """
    f = state.f
    E = total_energy(state.kinetic(), f, params)
    mu = state.kinetic() + state.v * f
    return E, mu


@dataclass(frozen=True)
class Extremum:
    energy: float
    n_ph: float
    mu: float
    grad_norm: float
    state: BlochState = field(repr=False, compare=False)


def _newton_kkt(q, a, params, T, C, tol=1e-9, maxiter=100):
    """Stationary point of E on the unit sphere by Newton on the KKT system.

    The gradient of E is 2N H(v(a)) a with v(a) = U0 n(f(a)); stationarity on
    the sphere is H(v(a)) a = mu a. Saddles are as wanted as minima, so a full
    Newton step (with backtracking on the residual) replaces quasi-Newton.
    """
    p = params
    M = len(a)
    a = a / np.linalg.norm(a)

    def parts(a):
        Ca = C @ a
        f = float(a @ Ca)
        D = p.delta_c - p.nu0 * f
        den = p.kappa**2 + D**2
        n = p.eta**2 / den
        v = p.u0 * n
        H = T + v * C
        mu = float(a @ H @ a)
        r = H @ a - mu * a
        return Ca, D, den, n, v, H, mu, r

    Ca, D, den, n, v, H, mu, r = parts(a)
    for _ in range(maxiter):
        g = float(np.linalg.norm(r))
        if g < tol:
            return a, mu, v, g
        dn = p.eta**2 * 2.0 * D * p.nu0 / den**2
        J = H - mu * np.eye(M) + 2.0 * p.u0 * dn * np.outer(Ca, Ca)
        K = np.zeros((M + 1, M + 1))
        K[:M, :M] = J
        K[:M, M] = -a
        K[M, :M] = a
        rhs = -np.concatenate([r, [0.0]])
        try:
            step = np.linalg.solve(K, rhs)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(K, rhs, rcond=None)[0]
        da = step[:M]
        t = 1.0
        for _ in range(30):
            trial = a + t * da
            trial /= np.linalg.norm(trial)
            out = parts(trial)
            if np.linalg.norm(out[-1]) < g or t < 1e-6:
                break
            t *= 0.5
        a = trial
        Ca, D, den, n, v, H, mu, r = out
    return a, mu, v, float(np.linalg.norm(r))


def method1_extremize(q: float, params: SystemParams, R: int | None = None, n_random: int = 8,
                      band: int = 0, seeds: BranchSet | None = None, noise: float = 1e-3,
                      rng_seed: int = 0, tol: float = 1e-9):
    """Stationary points of the reduced energy over real a_n, sum a_n^2 = 1.

    Seeds are the Method-2 solutions perturbed by Gaussian noise of size
    ``noise`` plus ``n_random`` band eigenvectors at random trial depths. Converged points
    (tangential residual ||H a - mu a|| < ``tol``) whose mu is the
    ``band``-th eigenvalue of H(v(a)) are kept and deduplicated.

    Returns a list of Extremum sorted by photon number.
    """
    p = validate_params(params)
    if seeds is None:
        seeds = find_branches(q, p, band, R=R)
    if R is None:
        R = seeds.truncation
    if R < 4:
        raise ValueError("R must be >= 4")
    M = 2 * R + 1
    n_idx = np.arange(-R, R + 1)
    T = np.diag((q + 2.0 * n_idx) ** 2)
    C = _coupling(R)
    rng = np.random.default_rng(rng_seed)

    starts = []
    for b in seeds.branches:
        a0 = np.asarray(b.state.coeffs, dtype=float)
        if len(a0) != M:
            a0 = _resize(a0, R)
        starts.append(a0 + noise * rng.standard_normal(M))
    # Random starts independent of Method 2: the band eigenvector at a random
    # trial depth in [0, U0 n_max], roughened by 1% noise.
    for _ in range(n_random):
        v_try = p.u0 * p.n_max * rng.uniform()
        a0 = np.linalg.eigh(T + v_try * C)[1][:, band]
        starts.append(a0 + 0.01 * rng.standard_normal(M) * np.abs(a0).max())

    found = []
    for a0 in starts:
        a, mu, v, g = _newton_kkt(q, a0, p, T, C, tol=tol)
        if not (g < tol):
            continue
        w = np.linalg.eigvalsh(T + v * C)
        rank = int(np.argmin(np.abs(w - mu)))
        if rank != band:
            continue
        i = int(np.argmax(np.abs(a)))
        if a[i] < 0:
            a = -a
        E = energy_of_coeffs(q, a, p)
        n = v / p.u0
        if any(abs(n - x.n_ph) <= 1e-7 * max(1.0, n) for x in found):
            continue
        state = BlochState(float(q), band, float(v), a, float(mu), R)
        found.append(Extremum(E, n, float(mu), g, state))
    if not found:
        raise ExtremizationFailure(f"no extremum converged at q={q}")
    found.sort(key=lambda e: e.n_ph)
    return found


def _resize(a, R):
    old = len(a) // 2
    out = np.zeros(2 * R + 1)
    k = min(old, R)
    out[R - k:R + k + 1] = a[old - k:old + k + 1]
    return out


def cross_validate(q_grid, params: SystemParams, band: int = 0, R: int | None = None,
                   workers: int | None = None) -> float:
    """Largest relative energy mismatch between Method 1 and Method 2.

    Raises ValidationFailure if the two methods find different numbers of
    branches at some q.
    """
    p = validate_params(params)

    def one(q):
        bs = find_branches(q, p, band, R=R)
        ext = method1_extremize(q, p, R=bs.truncation, band=band, seeds=bs)
        if len(ext) != bs.count:
            raise ValidationFailure(
                f"Method 1 found {len(ext)} extrema, Method 2 {bs.count} branches at q={q}", q=q
            )
        worst = 0.0
        for e, b in zip(ext, bs.branches):
            worst = max(worst, abs(e.energy - b.energy_total) / max(1.0, abs(b.energy_total)))
        return worst

    qs = [float(q) for q in q_grid]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return max(ex.map(one, qs))


LABELS3 = ("lower", "middle", "upper")


def _rank_labels(count):
    if count == 1:
        return ["lower"]
    if count == 2:
        return ["lower", "upper"]
    return ["lower"] + ["middle"] * (count - 2) + ["upper"]


@dataclass(frozen=True)
class BandPoint:
    q: float
    label: str
    track: int
    detached: bool
    energy_total: float
    energy_per_atom: float
    n_ph: float
    v: float
    mu: float
    branch: PhotonBranch = field(repr=False, compare=False)


@dataclass(frozen=True)
class BandDiagram:
    """Branches over a q grid with their continuation tracks.

    ``tracks`` maps a track id to the list of (q index, branch index) pairs it
    visits; ``detached`` lists the ids of tracks that reach neither end of the
    grid.
    """

    params: SystemParams
    band: int
    q_grid: np.ndarray
    sets: tuple
    points: tuple
    tracks: dict
    detached: frozenset

    def counts(self) -> np.ndarray:
        return np.array([s.count for s in self.sets])

    def points_at(self, i):
        return [pt for pt in self.points if pt.q == float(self.q_grid[i])]


def _feature(bs: BranchSet):
    p = bs.params
    return np.array([[b.energy_total / p.n_atoms, math.log1p(b.n_ph)] for b in bs.branches])


def _link(sets):
    """Assign track ids by nearest-(E/N, log(1+n)) matching between neighbours."""
    ids = [list(range(sets[0].count))]
    next_id = sets[0].count
    for prev, cur in zip(sets[:-1], sets[1:]):
        fp, fc = _feature(prev), _feature(cur)
        cost = np.linalg.norm(fp[:, None, :] - fc[None, :, :], axis=-1)
        rows, cols = linear_sum_assignment(cost)
        new = [-1] * cur.count
        for r, c in zip(rows, cols):
            new[c] = ids[-1][r]
        for c in range(cur.count):
            if new[c] < 0:
                new[c] = next_id
                next_id += 1
        ids.append(new)
    return ids


def band_sweep(params: SystemParams, band: int, q_grid, workers: int | None = None,
               R: int | None = None, solver=None) -> BandDiagram:
    """Run find_branches (or ``solver``) over ``q_grid`` and link branches into tracks."""
    solver = solver or find_branches
    p = validate_params(params)
    qs = np.asarray(q_grid, dtype=float)
    if np.any(np.abs(qs) > 1):
        raise ValueError("q_grid must lie in [-1, 1]")
    if R is None:
        R = choose_truncation(0.0, abs(p.u0) * p.n_max, band)

    def one(q):
        return solver(float(q), p, band, R=R)

    with ThreadPoolExecutor(max_workers=workers) as ex:
        sets = tuple(ex.map(one, qs))
    ids = _link(sets)
    tracks: dict = {}
    for i, row in enumerate(ids):
        for j, t in enumerate(row):
            tracks.setdefault(t, []).append((i, j))
    last = len(qs) - 1
    detached = frozenset(
        t for t, visits in tracks.items()
        if all(i not in (0, last) for i, _ in visits)
    )
    points = []
    for i, bs in enumerate(sets):
        order = np.argsort(bs.energies, kind="stable")
        labels = _rank_labels(bs.count)
        rank_of = {int(k): labels[r] for r, k in enumerate(order)}
        for j, b in enumerate(bs.branches):
            t = ids[i][j]
            points.append(BandPoint(
                q=float(qs[i]), label=rank_of[j], track=t, detached=t in detached,
                energy_total=b.energy_total, energy_per_atom=b.energy_total / p.n_atoms,
                n_ph=b.n_ph, v=b.v, mu=b.mu, branch=b,
            ))
    return BandDiagram(p, band, qs, sets, tuple(points), tracks, detached)


@dataclass(frozen=True)
class LoopEndpoint:
    q: float
    n_ph: float
    v: float


def loop_endpoints(diagram: BandDiagram, tol: float = 1e-12):
    """Quasi-momenta where two branches coalesce, refined between grid points.

    A coalescence is a tangency of G: the extremum of G lying between the two
    merging roots touches zero. Between the last grid point with the pair and
    the first without, that extremum value is followed in q and its zero is
    located with Brent's method, so the branch gap is exactly zero at the tip.
    """
    p = diagram.params
    band = diagram.band
    qs = diagram.q_grid
    out = []
    for i in range(len(qs) - 1):
        a, b = diagram.sets[i], diagram.sets[i + 1]
        if a.count == b.count:
            continue
        many, few = (a, b) if a.count > b.count else (b, a)
        pair = _merging_pair(many, few)
        if pair is None:
            continue
        v1, v2 = pair
        R = many.truncation
        sign = np.sign(_G(0.5 * (v1 + v2), _overlap(_eig(many.q, 0.5 * (v1 + v2), band, R)[1]), p))
        width = abs(v2 - v1)
        lo = min(v1, v2) - width
        hi = max(v1, v2) + width

        def extremum(q, lo=lo, hi=hi, sign=sign, R=R):
            def g(v):
                return -sign * _G(v, _overlap(_eig(q, v, band, R)[1]), p)
            res = minimize_scalar(g, bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
            return -float(res.fun) * sign, float(res.x)

        def h(q):
            val, _ = extremum(q)
            return sign * val

        qa, qb = many.q, few.q
        try:
            qt = brentq(h, qa, qb, xtol=tol)
        except ValueError:
            continue
        _, vt = extremum(qt)
        out.append(LoopEndpoint(float(qt), abs(vt / p.u0), vt))
    return out


def _merging_pair(many: BranchSet, few: BranchSet):
    # the branches of ``many`` not matched to any branch of ``few``
    fm, ff = _feature(many), _feature(few)
    cost = np.linalg.norm(fm[:, None, :] - ff[None, :, :], axis=-1)
    rows, _ = linear_sum_assignment(cost)
    left = sorted(set(range(many.count)) - set(rows.tolist()))
    if len(left) != 2:
        return None
    return many.branches[left[0]].v, many.branches[left[1]].v


def edge_slopes(params: SystemParams, band: int = 0, h: float = 1e-3, R: int | None = None):
    """Central-difference dE/dq of every branch at q = -1 and q = +1.

    Uses q = +-(1 + h) directly; the Bloch Hamiltonian is defined for any q.
    Branches are paired across the edge by nearest photon number.

    Returns {q_edge: array of slopes of E_total}.
    """
    p = validate_params(params)
    out = {}
    for edge in (-1.0, 1.0):
        inner = find_branches(edge - math.copysign(h, edge), p, band, R=R)
        outer = find_branches(edge + math.copysign(h, edge), p, band, R=R, _any_q=True)
        slopes = []
        for b in inner.branches:
            k = int(np.argmin(np.abs(outer.n_ph - b.n_ph)))
            e_in, e_out = b.energy_total, outer.branches[k].energy_total
            slopes.append((e_out - e_in) / (2 * h) * math.copysign(1.0, edge))
        out[edge] = np.array(slopes)
    return out
