import math

import numpy as np
import pytest
import sympy as sp

from cavityband import (
    SystemParams,
    butterfly_check,
    cusp_reduce_shallow,
    find_branches,
    state_function_G,
    swallowtail_scan,
    transversality_rank_check,
)
from cavityband.catastrophe import matrix_rank, swallowtail_conditions
from cavityband.errors import InconclusiveError


@pytest.fixture(scope="module")
def deep_points():
    return swallowtail_scan(0.69, n_atoms=100, kappa=1.0)


@pytest.fixture(scope="module")
def edge_point():
    pts = swallowtail_scan(0.96, n_atoms=1e4, kappa=350.0)
    assert len(pts) == 1
    return pts[0]


def planted_tower(v0, D0, h0, h1, c4, c5):
    """Exact f..f'''' at v0 for f = D0 - sqrt(h(v)/v), h = h0 + h1 (v - v0) + c4 (v - v0)^4 + c5 (v - v0)^5.

    h'' = h''' = 0 at v0 by construction; h'''' = 24 c4.
    """
    v = sp.symbols("v")
    h = h0 + h1 * (v - v0) + c4 * (v - v0) ** 4 + c5 * (v - v0) ** 5
    f = D0 - sp.sqrt(h / v)
    vals = [float(sp.diff(f, v, k).subs(v, v0)) for k in range(5)]
    return np.array(vals), np.full(5, 1e-13)


def test_planted_swallowtail_conditions():
    vals, errs = planted_tower(2.0, 0.7, 0.3, -0.1, 0.05, 0.02)
    (D, X, r3, r4), _ = swallowtail_conditions(2.0, vals, errs)
    assert D == pytest.approx(0.7, rel=1e-12)
    assert X == pytest.approx(0.1, rel=1e-12)  # X = -h'(v0)
    assert abs(r3) < 1e-12
    assert abs(r4) > 1e-3


def _point(v, vals, errs):
    from cavityband.catastrophe import _physical

    return _physical(0.5, v, vals, errs, 100.0, 1.0)


def test_planted_butterfly_detected():
    vals, errs = planted_tower(2.0, 0.7, 0.3, -0.1, 0.0, 0.02)
    pt = _point(2.0, vals, errs)
    res = butterfly_check(pt, tower=lambda v: (vals, errs))
    assert res.verdict == "butterfly"
    assert abs(res.residual) < 1e-10


def test_planted_non_butterfly_detected():
    vals, errs = planted_tower(2.0, 0.7, 0.3, -0.1, 0.05, 0.02)
    res = butterfly_check(_point(2.0, vals, errs), tower=lambda v: (vals, errs))
    assert res.verdict == "no butterfly"


def test_butterfly_inconclusive_with_large_errors():
    vals, _ = planted_tower(2.0, 0.7, 0.3, -0.1, 1e-4, 0.02)
    errs = np.full(5, 1e-2)
    with pytest.raises(InconclusiveError):
        butterfly_check(_point(2.0, vals, np.full(5, 1e-13)), tower=lambda v: (vals, errs))


def shallow_G(v, p):
    f = 0.5 - v / 16.0
    return v * p.kappa**2 + v * (p.delta_c - p.nu0 * f) ** 2 - p.eta**2 * p.u0


@pytest.mark.parametrize("seed", range(5))
def test_shallow_cubic_roots(seed):
    rng = np.random.default_rng(seed)
    p = SystemParams(kappa=rng.uniform(100, 500), n_atoms=1e4, u0=rng.uniform(0.5, 2),
                     eta=rng.uniform(100, 1500), delta_c=rng.uniform(500, 6000))
    cc = cusp_reduce_shallow(p)
    roots = cc.roots()
    scale = p.eta**2 * p.u0
    for r in roots:
        assert abs(shallow_G(r, p)) < 1e-8 * scale
    assert cc.three_roots() == (len(roots) == 3)
    # the depressed cubic has the same roots shifted
    s = cc.s_of(roots)
    np.testing.assert_allclose(s**3 + cc.c2 * s + cc.c1, 0.0, atol=1e-7 * max(1.0, abs(cc.c1)))


def test_cusp_inequality_is_weaker_than_discriminant():
    p = SystemParams(350.0, 1e4, 1.0, 330.0, 4389.0)
    cc = cusp_reduce_shallow(p)
    if cc.three_roots():
        assert cc.c1**2 < -16 * cc.c2**3 / 27 + 1e-300


def test_deep_point_q069(deep_points):
    assert len(deep_points) == 2
    pt = deep_points[1]
    assert pt.v == pytest.approx(7.75, rel=0.05)
    assert pt.delta_c_over_kappa == pytest.approx(0.90, rel=0.05)
    assert pt.eta == pytest.approx(14.5, rel=0.05)
    assert pt.u0 == pytest.approx(0.15, rel=0.05)
    # frozen values
    assert (pt.v, pt.delta_over_NU0, pt.inv_NU0_sq) == pytest.approx((7.74666, 0.058382, 0.0042225), rel=1e-4)
    assert not pt.inconclusive


def triple_root_check(pt):
    """Oracle: G, G', G'' vanish at the swallowtail depth (central differences of G)."""
    p = pt.params()
    h = 1e-3 * pt.v
    g = [state_function_G(pt.v + k * h, pt.q, p) for k in (-2, -1, 0, 1, 2)]
    scale = abs(p.eta**2 * p.u0)
    d1 = (g[3] - g[1]) / (2 * h)
    d2 = (g[3] - 2 * g[2] + g[1]) / h**2
    d3 = (g[4] - 2 * g[3] + 2 * g[1] - g[0]) / (2 * h**3)
    return abs(g[2]) / scale, abs(d1) * pt.v / scale, abs(d2) * pt.v**2 / scale, abs(d3) * pt.v**3 / scale


@pytest.mark.parametrize("which", [0, 1])
def test_swallowtail_is_triple_root(deep_points, which):
    g0, g1, g2, g3 = triple_root_check(deep_points[which])
    assert g0 < 1e-8 and g1 < 1e-5 and g2 < 1e-4
    assert g3 > 10 * g2


@pytest.mark.parametrize("q", [0.548, 0.6, 0.9])
def test_near_threshold_points_are_triple_roots(q):
    # just above the threshold D passes through zero; such points must survive the pole filter
    pts = swallowtail_scan(q)
    assert len(pts) == 1
    g0, g1, g2, g3 = triple_root_check(pts[0])
    assert g0 < 1e-8 and g1 < 1e-5 and g2 < 1e-4
    assert g3 > 10 * g2


def test_edge_point(edge_point):
    pt = edge_point
    assert pt.eta == pytest.approx(1.7, rel=0.10)
    assert pt.delta_c_over_kappa == pytest.approx(6.4, rel=0.10)
    assert pt.u0 == pytest.approx(1.13, rel=0.01)
    assert pt.v == pytest.approx(1.70207, rel=1e-4)
    g0, g1, g2, _ = triple_root_check(pt)
    assert g0 < 1e-8 and g1 < 1e-5 and g2 < 1e-4


def test_edge_point_second_steady_state(edge_point):
    # besides the triple root the steady-state equation has one more solution
    bs = find_branches(0.96, edge_point.params())
    assert np.min(np.abs(bs.n_ph * edge_point.u0 - 0.04176)) < 1e-3


def test_scan_independent_of_atom_number(deep_points):
    other = swallowtail_scan(0.69, n_atoms=1e4, kappa=350.0)
    assert len(other) == len(deep_points)
    for a, b in zip(deep_points, other):
        assert (b.v, b.delta_over_NU0, b.inv_NU0_sq) == pytest.approx(
            (a.v, a.delta_over_NU0, a.inv_NU0_sq), rel=1e-10)
        # N U0 / kappa and the pump depth U0 eta^2 / kappa^2 are the invariant combinations
        assert b.u0 * 1e4 / 350.0 == pytest.approx(a.u0 * 100, rel=1e-10)
        assert b.eta**2 * b.u0 == pytest.approx(a.eta**2 * a.u0, rel=1e-10)


@pytest.mark.parametrize("q,count", [(0.5, 0), (0.545, 0), (0.55, 1), (0.62, 2), (0.7, 2), (0.78, 2), (0.8, 1)])
def test_point_count_by_quasi_momentum(q, count):
    assert len(swallowtail_scan(q)) == count


def test_no_butterfly_at_found_points(deep_points, edge_point):
    for pt in list(deep_points) + [edge_point]:
        res = butterfly_check(pt)
        assert res.verdict == "no butterfly"
        assert abs(res.residual) > 3 * res.error


def test_transversality_rank(deep_points):
    res = transversality_rank_check(deep_points[1])
    assert res.rank == 4
    assert np.all(np.abs(res.z) > 0)


def test_rank_drops_for_dependent_unfolding(deep_points):
    base = transversality_rank_check(deep_points[1])
    dup = np.vstack([base.z[0], 3.0 * base.z[0]])
    assert transversality_rank_check(deep_points[1], unfolding=dup).rank == 3


def test_matrix_rank_row_scaling():
    M = np.diag([1e6, 1.0, 1e-6, 1.0])
    assert matrix_rank(M)[0] == 4
    M[3] = M[1] * 1e5
    assert matrix_rank(M)[0] == 3
