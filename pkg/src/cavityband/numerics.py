"""Central finite differences with Richardson extrapolation and error estimates."""
from __future__ import annotations

import numpy as np

__all__ = ["derivative_tower", "ROUNDOFF_EPS"]

# Effective relative noise of one function evaluation. Eigenvector-derived
# quantities carry a few ulps of noise, so this sits a little above eps.
ROUNDOFF_EPS = 4e-16

# Sum of absolute stencil weights for orders 1..4 (central, second order).
_STENCIL_WEIGHT = {1: 1.0, 2: 4.0, 3: 6.0, 4: 16.0}


def _stencil(k, fm2, fm1, f0, fp1, fp2, h):
    if k == 1:
        return (fp1 - fm1) / (2 * h)
    if k == 2:
        return (fp1 - 2 * f0 + fm1) / h**2
    if k == 3:
        return (fp2 - 2 * fp1 + 2 * fm1 - fm2) / (2 * h**3)
    if k == 4:
        return (fp2 - 4 * fp1 + 6 * f0 - 4 * fm1 + fm2) / h**4
    raise ValueError(f"order must be 1..4, got {k}")


def derivative_tower(func, x, h0, max_order=4, levels=4, noise_floor=1e-3):
    """Derivatives of ``func`` up to ``max_order`` at points ``x``.

    ``func`` must accept a 1-d array and return an array of the same shape.
    Each order uses the second-order central stencil at steps h0, h0/2, ...,
    h0/2**(levels-1), combined in a Richardson tableau with ratio 4.
    All levels share the same function evaluations (11 per point for 4 levels).

    The error estimate adds two pieces:
      - truncation: distance of the final tableau entry from its two
        neighbours in the last row and the previous diagonal;
      - roundoff: evaluation noise amplified by the finest stencil and by
        the extrapolation weights.

    Args:
        func: vectorized callable.
        x: evaluation points, shape (P,) or scalar.
        h0: initial step per point, same shape as ``x`` (or scalar).
        max_order: highest derivative, 1..4.
        levels: number of step halvings in the tableau.
        noise_floor: lower bound on the function scale entering roundoff.

    Returns:
        (values, errors): arrays of shape (max_order+1, P). Row 0 holds the
        function value itself with zero error.
    """
    if not 1 <= max_order <= 4:
        raise ValueError("max_order must be in 1..4")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    h0 = np.broadcast_to(np.asarray(h0, dtype=float), x.shape)
    unit = 2 ** (levels - 1)
    base = h0 / unit
    mults = sorted({s * m * 2**i for i in range(levels) for s in (1, 2) for m in (-1, 1)})
    mults = [0] + mults
    offsets = np.array(mults, dtype=float)
    pts = x[None, :] + offsets[:, None] * base[None, :]
    vals = np.asarray(func(pts.ravel()), dtype=float).reshape(pts.shape)
    F = {m: vals[j] for j, m in enumerate(mults)}
    f0 = F[0]
    scale = np.maximum(np.max(np.abs(vals), axis=0), noise_floor)

    out = np.empty((max_order + 1, x.size))
    err = np.zeros((max_order + 1, x.size))
    out[0] = f0
    m = levels - 1
    amp = np.prod([(4.0**j + 1) / (4.0**j - 1) for j in range(1, levels)])
    hmin = base  # finest step equals the base unit
    for k in range(1, max_order + 1):
        T = []
        for i in range(levels):
            u = unit // 2**i
            h = base * u
            T.append([_stencil(k, F[-2 * u], F[-u], f0, F[u], F[2 * u], h)])
        for i in range(1, levels):
            for j in range(1, i + 1):
                prev = T[i][j - 1]
                T[i].append(prev + (prev - T[i - 1][j - 1]) / (4.0**j - 1))
        best = T[m][m]
        trunc = np.maximum(np.abs(best - T[m][m - 1]), np.abs(best - T[m - 1][m - 1]))
        roundoff = ROUNDOFF_EPS * scale * _STENCIL_WEIGHT[k] / hmin**k * amp
        out[k] = best
        err[k] = trunc + roundoff
    return out, err
