"""Energetic and dynamic stability of steady states.

For a fixed atom number the second variation of the grand potential per atom,
Omega = E/N - mu <psi|psi>, around psi_0 with perturbation Psi = (dpsi, dpsi*)
in the Bloch basis n = -J..J is (1/2) Psi^+ A Psi with

    A = [[H - mu + 2 rho W, 2 rho W], [2 rho W, H - mu + 2 rho W]],
    W = w w^T,  w = C a  (w_j = a_j/2 + (a_{j-1} + a_{j+1})/4),
    rho = eta^2 N U0^2 d / (kappa^3 (1 + d^2)^2),  d = (Dc - N U0 f)/kappa.

rho is half the second derivative of the per-atom arctan term with respect
to f. The linearized dynamics is i dPsi/dt = sigma_z A Psi.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bloch import BlochState, build_hamiltonian
from .errors import NumericalError, TruncationError
from .model import SystemParams
from .steady_state import PhotonBranch, detuning_ratio

__all__ = [
    "StabilityMatrix",
    "StabilityReport",
    "stability_rho",
    "build_stability_matrix",
    "classify_branch",
    "classify_band",
    "symplectic_pairing_error",
]


def stability_rho(f: float, params: SystemParams) -> float:
    p = params
    d = detuning_ratio(f, p)
    return p.eta**2 * p.n_atoms * p.u0**2 * d / (p.kappa**3 * (1.0 + d * d) ** 2)


@dataclass(frozen=True)
class StabilityMatrix:
    A: np.ndarray = field(repr=False)
    rho: float
    w: np.ndarray = field(repr=False)
    a: np.ndarray = field(repr=False)
    mu: float
    J: int

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def sigma_z(self) -> np.ndarray:
        m = self.dim // 2
        return np.diag(np.concatenate([np.ones(m), -np.ones(m)]))

    def projected(self) -> np.ndarray:
        """A restricted to perturbations orthogonal to psi_0 in both blocks.

        This drops the phase (gauge) mode (a, -a) and the norm-changing
        direction (a, a); the latter is not a fixed-N perturbation.
        """
        m = self.dim // 2
        Q, _ = np.linalg.qr(np.column_stack([self.a, np.eye(m)]))
        P = Q[:, 1:m]
        Z = np.zeros_like(P)
        B = np.block([[P, Z], [Z, P]])
        return B.T @ self.A @ B


def build_stability_matrix(branch: PhotonBranch, state: BlochState | None, params: SystemParams,
                           J: int | None = None) -> StabilityMatrix:
    """Second-variation matrix A for one branch in the basis |n| <= J.

    J defaults to R - 4 and must stay below the state's truncation R.
    """
    if state is None:
        state = branch.state
    R = state.truncation
    if J is None:
        J = R - 4
    if not 0 < J < R:
        raise TruncationError(f"perturbation order J={J} must satisfy 0 < J < R={R}")
    a_full = np.asarray(state.coeffs, dtype=float)
    w_full = 0.5 * a_full
    w_full[1:] += 0.25 * a_full[:-1]
    w_full[:-1] += 0.25 * a_full[1:]
    sl = slice(R - J, R + J + 1)
    H = build_hamiltonian(state.q, state.v, R)[sl, sl]
    a, w = a_full[sl], w_full[sl]
    rho = stability_rho(float(a_full[:-1] @ a_full[1:]) * 0.5 + 0.5, params)
    m = 2 * J + 1
    W = 2.0 * rho * np.outer(w, w)
    D = H - state.mu * np.eye(m) + W
    A = np.block([[D, W], [W, D]])
    A = 0.5 * (A + A.T)
    return StabilityMatrix(A, rho, w, a, state.mu, J)


@dataclass(frozen=True)
class StabilityReport:
    branch_id: int
    q: float
    n_ph: float
    label: str
    min_eig_A: float
    max_abs_imag_sigmaA: float
    energetically_stable: bool
    dynamically_stable: bool
    J: int
    tol: float
    flags: tuple = ()

    @property
    def stable(self) -> bool:
        return self.energetically_stable and self.dynamically_stable


def symplectic_pairing_error(eigs) -> float:
    """Largest distance from each eigenvalue's partner -conj(lambda) to the spectrum."""
    e = np.asarray(eigs)
    partner = -np.conj(e)
    return float(max(np.min(np.abs(e - x)) for x in partner))


def classify_branch(branch: PhotonBranch, state: BlochState | None, params: SystemParams,
                    J: int | None = None, branch_id: int = 0, label: str = "",
                    flags=()) -> StabilityReport:
    """Energetic (A > 0) and dynamic (real sigma_z A spectrum) verdicts."""
    M = build_stability_matrix(branch, state, params, J)
    Ap = M.projected()
    m = Ap.shape[0] // 2
    sz = np.concatenate([np.ones(m), -np.ones(m)])
    try:
        eA = np.linalg.eigvalsh(Ap)
        eS = np.linalg.eigvals(sz[:, None] * Ap)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(str(exc)) from exc
    tol = 1e-8 * np.linalg.norm(M.A, 2)
    emin = float(eA[0])
    imag = float(np.max(np.abs(eS.imag)))
    energetic = emin > -tol
    dynamic = imag < tol
    flags = tuple(flags)
    if energetic and not dynamic:
        flags += ("energetically stable but dynamically unstable",)
    return StabilityReport(int(branch_id), float(branch.state.q), float(branch.n_ph), label,
                           emin, imag, bool(energetic), bool(dynamic), M.J, float(tol), flags)


def classify_band(diagram, J: int | None = None, workers: int | None = None):
    """One StabilityReport per point of a BandDiagram, in point order.

    Points from q values with five coexisting branches carry the flag
    "anticipated": verdicts there are predictions with no reference result.
    """
    pts = diagram.points
    counts = {float(q): s.count for q, s in zip(diagram.q_grid, diagram.sets)}

    def one(item):
        k, pt = item
        flags = ("anticipated",) if counts[pt.q] >= 5 else ()
        return classify_branch(pt.branch, None, diagram.params, J, branch_id=pt.track,
                               label=pt.label, flags=flags)

    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(one, enumerate(pts)))
