"""Units, system parameters and small helpers shared by every module.

Unit system
-----------
Energies are measured in the recoil energy E_R, frequencies in the recoil
frequency w_R = E_R/hbar, lengths in 1/k_c and times in hbar/E_R. Every public
function of the package exchanges quantities in these units only. The
catastrophe module rescales frequencies by kappa internally and converts back
at its boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import InconsistentSignError, ParameterError

UNITS = {
    "energy": "E_R",
    "frequency": "omega_R = E_R/hbar",
    "length": "1/k_c",
    "time": "hbar/E_R",
}


@dataclass(frozen=True)
class SystemParams:
    """Cavity and atom constants, all frequencies in units of w_R.

    Attributes:
        kappa: cavity field decay rate (> 0).
        n_atoms: number of atoms N (>= 1).
        u0: light shift per photon, signed and nonzero. u0 > 0 is blue detuning.
        eta: pump strength (>= 0).
        delta_c: pump-cavity detuning.
    """

    kappa: float
    n_atoms: float
    u0: float
    eta: float
    delta_c: float

    @property
    def n_max(self) -> float:
        """Largest possible steady-state photon number eta^2/kappa^2."""
        return self.eta**2 / self.kappa**2

    @property
    def nu0(self) -> float:
        """Collective light shift N*U0."""
        return self.n_atoms * self.u0

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)


def validate_params(params: SystemParams) -> SystemParams:
    """Check every invariant of SystemParams.

    Returns the params unchanged when valid, otherwise raises ParameterError
    carrying one message per violation.
    """
    errors = []
    for name in ("kappa", "n_atoms", "u0", "eta", "delta_c"):
        val = getattr(params, name)
        if not isinstance(val, (int, float)) or isinstance(val, bool) or not math.isfinite(val):
            errors.append(f"{name} must be a finite number")
    if errors:
        raise ParameterError(errors)
    if not params.kappa > 0:
        errors.append("kappa must be positive")
    if not params.n_atoms >= 1:
        errors.append("n_atoms must be at least 1")
    if params.u0 == 0:
        errors.append("u0 must be nonzero")
    if not params.eta >= 0:
        errors.append("eta must be non-negative")
    if errors:
        raise ParameterError(errors)
    return params


def check_quasi_momentum(q: float) -> float:
    if not (math.isfinite(q) and -1.0 <= q <= 1.0):
        raise ParameterError([f"q must lie in [-1, 1], got {q!r}"])
    return float(q)


def n_ph_from_depth(v: float, params: SystemParams) -> float:
    """Photon number from lattice depth, n_ph = v/U0."""
    n = v / params.u0
    if n < 0:
        raise InconsistentSignError(
            f"depth v={v!r} and u0={params.u0!r} have opposite signs"
        )
    return n + 0.0  # turns -0.0 into 0.0


def depth_from_n_ph(n_ph: float, params: SystemParams) -> float:
    return params.u0 * n_ph
