import math

import numpy as np
import pytest

from builders import matrix, scalar, schroedinger, zero
from resfact.contour import (_var1_table, admissibility, build_contour, estimate_r0, real_axis_table,
                             var1_on_contour, var_theta_real)
from resfact.errors import (ContourDegenerate, ContourOutsideDomain, DivergentVariation,
                            NoAdmissibleContour)
from resfact.model import PhiProfile, SeparableAnalyticModel, scalar_model


def test_degenerate_height_rejected():
    m, _ = scalar()
    with pytest.raises(ContourDegenerate):
        build_contour(m, height=0.0)
    with pytest.raises(ContourDegenerate):
        build_contour(m, height=1e-14)


def test_path_structure():
    m, c = scalar()
    arc = c.nodes[: c.n_arc]
    assert np.all(arc.imag > 0)
    assert abs(c.arc(0.0) - m.alpha0) < 1e-15
    assert np.all(c.nodes[c.n_arc:].imag == 0)
    assert c.nodes[c.n_arc:].real.min() >= c.re_entry
    # weights integrate dmu exactly along the path
    assert np.sum(c.weights) == pytest.approx(c.cutoff - m.alpha0, rel=1e-12)
    mc = c.mirrored()
    assert np.allclose(mc.nodes, c.nodes.conj())


def test_parabola_membership():
    s, _ = schroedinger()

    def inside(mu):
        return mu.real > 1.0 - 1.0 + mu.imag ** 2 / 4.0

    build_contour(s, height=0.5, re_entry=1.1)
    with pytest.raises(ContourOutsideDomain):
        build_contour(s, height=2.5, re_entry=1.1)
    # the direct inequality agrees with the builder's decisions
    t = np.linspace(0, math.pi, 101)[1:-1]
    arc = lambda h: 1.05 - 0.05 * np.cos(t) + 1j * h * np.sin(t)
    assert np.all(inside(arc(0.5)))
    assert np.all(inside(arc(1.5)))
    assert not np.all(inside(arc(2.5)))


def test_zero_density_contour():
    m, c = zero()
    assert var1_on_contour(m, c) == 0
    rep = admissibility(m, c)
    assert rep.var_tilde == 0 and rep.r_min == 0
    assert rep.r_max == pytest.approx(rep.d0)
    assert rep.condition1_ok and rep.condition2_ok


def test_var_theta_real():
    m, _ = zero()
    assert var_theta_real(m, 0.0) == 0
    one = scalar_model(alpha0=1.0, tilde_a1=2.0, eps=1.0)
    assert var_theta_real(one, 0.0) == pytest.approx(1.0, abs=1e-8)
    sing = scalar_model(alpha0=1.0, tilde_a1=2.0, eps=1.0, gamma=-0.5)
    # int_0^inf t^-1/2 e^-t dt = sqrt(pi)
    assert var_theta_real(sing, 0.0) == pytest.approx(math.sqrt(math.pi), abs=1e-8)
    rng = np.random.default_rng(4)
    for _ in range(5):
        phi = PhiProfile(rng.choice(["exp-decay", "gaussian"]), 1.0, rng.uniform(0.1, 1), rng.uniform(0.5, 3))
        mm = SeparableAnalyticModel(phi, rng.standard_normal((2, 2)), np.diag([2.0, 3.0]))
        vals = [var_theta_real(mm, th) for th in (0.0, 0.5, 1.0, 2.0)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_divergent_variation():
    m = scalar_model()
    m.endpoint_exponent = -1.0
    with pytest.raises(DivergentVariation):
        var_theta_real(m, 0.0)


def test_var1_real_axis_matches_theta_one():
    m, _ = scalar()
    table = real_axis_table(m, m.alpha0 + 4.0)
    v = _var1_table(table) + m.tail_bound(m.cutoff)
    assert v == pytest.approx(var_theta_real(m, 1.0), rel=1e-12)


def test_var1_finite_for_schroedinger():
    s, c = schroedinger()
    v = var1_on_contour(s, c)
    assert math.isfinite(v) and 0 < v < 1


def test_scalar_report_refinement():
    m, c = scalar()
    a = admissibility(m, c)
    b = admissibility(m, c.refined())
    for k in ("var1", "var_tilde", "d0", "omega", "r_min", "r_max"):
        assert getattr(a, k) == pytest.approx(getattr(b, k), rel=1e-8, abs=1e-12), k
    assert a.admissible


def test_large_coupling_fails_condition_one():
    m, c = scalar()
    big = m.scaled(60.0)
    rep = admissibility(big, build_contour(big, height=0.3, re_entry=3.0))
    assert rep.var_tilde >= 1
    assert not rep.condition1_ok and not rep.admissible


def test_report_invariants():
    for seed in range(4):
        m, c = matrix(seed, n=3)
        rep = admissibility(m, c)
        assert rep.admissible
        assert rep.r_min < 0.5 * rep.d0 * (1 - rep.var_tilde) < rep.r_max
        nodes = c.table.nodes
        dist = np.abs(nodes[:, None] - m.spectrum_tilde_a1[None, :]).min(axis=1)
        sup = float(np.max((1 + np.abs(nodes)) / dist))
        assert rep.var_tilde <= rep.var1 * sup * (1 + 1e-12)


def test_mirrored_contour_constants_agree():
    for m, c in (scalar(), matrix(1, n=3), schroedinger()):
        a = admissibility(m, c).to_dict()
        b = admissibility(m, c.mirrored()).to_dict()
        for k in ("var1", "var_tilde", "d0", "r_min", "r_max"):
            assert a[k] == pytest.approx(b[k], rel=1e-12), k


def test_quadrature_convergence():
    m, c = scalar()
    f = c.refined()
    for fn in (var1_on_contour,):
        assert fn(m, c) == pytest.approx(fn(m, f), rel=1e-8)
    assert admissibility(m, c).var_tilde == pytest.approx(admissibility(m, f).var_tilde, rel=1e-8)
    assert c.tol_quad <= 1e-8


def test_estimate_r0():
    m, c = scalar()
    assert estimate_r0(m, [c]) == admissibility(m, c).r_min
    z, cz = zero()
    assert estimate_r0(z, [cz]) == 0
    family = [build_contour(m, height=h, re_entry=3.0) for h in (0.15, 0.2, 0.3, 0.4, 0.5)]
    r0 = estimate_r0(m, family)
    assert all(r0 <= admissibility(m, f).r_min for f in family)
    big = m.scaled(60.0)
    with pytest.raises(NoAdmissibleContour):
        estimate_r0(big, [build_contour(big, height=0.3, re_entry=3.0)])
