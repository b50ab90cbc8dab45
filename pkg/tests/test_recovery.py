import math

import numpy as np
import pytest

from cavicore.cavity import cavity_perimeter, cavity_volume, trace_on_circle
from cavicore.deformation import (
    compose,
    example_radial,
    example_spike,
    finite_difference_grad,
)
from cavicore.energy import subquadratic_density
from cavicore.geometry import Domain, det2
from cavicore.recovery import (
    build_phi,
    build_push,
    default_r_rule,
    recovery_energy_table,
)

DENS = subquadratic_density(1.1)
LAMBDAS = (2.5, 2.5)


# --------------------------------------------------------------------------
# the radial reparametrization


def test_phi_identity_when_target_equals_eps():
    phi = build_phi(0.1, 0.1, 3)
    t = np.linspace(0.0, 0.5, 4001)
    assert np.max(np.abs(phi.eval(t) - t)) <= 1e-12
    assert np.max(np.abs(phi.deriv(t) - 1.0)) <= 1e-12


def test_phi_interpolation_and_tail():
    eps, r, n = 0.1, 0.1005, 10
    phi = build_phi(eps, r, n)
    assert float(phi.eval(np.array(eps))) == pytest.approx(r, abs=1e-15)
    assert float(phi.eval(np.array(0.0))) == 0.0
    t = np.linspace(2 * eps, 1.0, 1001)
    assert np.max(np.abs(phi.eval(t) - t)) <= 1e-15


def test_phi_uniform_bounds_on_grid():
    eps, n = 0.1, 10
    r = default_r_rule(eps, n)
    phi = build_phi(eps, r, n)
    t = np.linspace(1e-9, 3 * eps, 10_000)
    total = np.abs(phi.eval(t) / t - 1.0) + np.abs(phi.deriv(t) - 1.0)
    assert np.max(total) <= 1.0 / n
    assert np.all(np.diff(phi.eval(t)) > 0)


def test_phi_rejects_far_target():
    with pytest.raises(ValueError):
        build_phi(0.1, 0.2, 5)


# --------------------------------------------------------------------------
# the radial push


def _push(eps=0.1, n=2):
    phi = build_phi(eps, default_r_rule(eps, n), n)
    return phi, build_push(phi, [[0.0, 0.0]], domain=Domain(q=2, radius=1.0))


def test_push_identity_profile_is_identity(rng):
    phi = build_phi(0.1, 0.1, 4)
    f = build_push(phi, [[0.0, 0.0]])
    pts = rng.uniform(-0.5, 0.5, (200, 2))
    assert np.allclose(f(pts), pts, atol=1e-12)


def test_push_fixes_flaw_and_maps_sphere():
    phi, f = _push(eps=0.1, n=2)
    assert np.allclose(f(np.array([0.0, 0.0])), [0.0, 0.0], atol=0)
    t = np.linspace(0, 2 * math.pi, 64)
    circle = 0.1 * np.stack([np.cos(t), np.sin(t)], -1)
    image = f(circle)
    assert np.allclose(np.linalg.norm(image, axis=1), phi.r_n, atol=1e-14)
    # identity outside the double ball
    far = 0.35 * np.stack([np.cos(t), np.sin(t)], -1)
    assert np.allclose(f(far), far, atol=0)


def test_push_gradient_formula_vs_fd(rng):
    phi, f = _push(eps=0.1, n=3)
    pts = rng.uniform(-0.25, 0.25, (100, 2))
    pts = pts[np.linalg.norm(pts, axis=1) > 0.02]
    G = f.grad(pts)
    F = finite_difference_grad(f.eval, pts, h=1e-6)
    assert np.max(np.abs(G - F)) <= 1e-8
    # determinant at the sphere radius equals (r/eps) * phi'(eps)
    x = np.array([0.1, 0.0])
    d = det2(f.grad(x))
    expect = (phi.r_n / 0.1) * float(phi.deriv(np.array(0.1)))
    assert d == pytest.approx(expect, rel=1e-12)
    assert np.all(det2(G) > 0)


def test_push_lipschitz_distance_bound(rng):
    for n in (1, 2, 5, 10):
        eps = 0.1
        phi, f = _push(eps=eps, n=n)
        pts = rng.uniform(-0.4, 0.4, (4000, 2))
        pts = pts[np.linalg.norm(pts, axis=1) > 1e-3]
        sup_val = np.max(np.linalg.norm(f(pts) - pts, axis=1))
        sup_grad = np.max(np.sqrt(np.sum(
            (f.grad(pts) - np.eye(2)) ** 2, axis=(-2, -1))))
        bound = (2 * (eps + 1) + math.sqrt(2.0)) / n
        assert sup_val + sup_grad <= bound


def test_push_rejects_overlap_and_boundary():
    phi = build_phi(0.1, 0.1005, 5)
    with pytest.raises(ValueError):
        build_push(phi, [[0.0, 0.0], [0.3, 0.0]])
    with pytest.raises(ValueError):
        build_push(phi, [[0.85, 0.0]], domain=Domain(q=2, radius=1.0))


def test_composition_chain_rule(rng):
    y = example_radial(0.5)
    phi, f = _push(eps=0.1, n=2)
    comp = compose(y, f)
    pts = rng.uniform(-0.4, 0.4, (300, 2))
    keep = (np.linalg.norm(pts, axis=1) > 0.03) & (np.min(np.abs(pts), axis=1) > 1e-3)
    # stay away from the push's radial junctions where curvature jumps
    radii = np.linalg.norm(pts, axis=1)
    for z in phi.zone_radii():
        keep &= np.abs(radii - z) > 1e-3
    pts = pts[keep]
    G = comp.grad(pts)
    F = finite_difference_grad(comp.eval, pts, h=1e-5)
    scale = np.maximum(np.abs(G).max(axis=(-2, -1)), 1.0)
    assert np.max(np.abs(G - F).max(axis=(-2, -1)) / scale) <= 1e-6


# --------------------------------------------------------------------------
# recovery table


@pytest.fixture(scope="module")
def radial_table():
    y = example_radial(0.5)
    return recovery_energy_table(y, y.singular_points, [0.2, 0.1, 0.05, 0.025],
                                 DENS, LAMBDAS)


def test_recovery_gap_shrinks(radial_table):
    gaps = [r.rel_gap for r in radial_table.rows]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 0.02


def test_recovery_trace_identity(radial_table):
    for r in radial_table.rows:
        assert r.trace_identity_rel <= 1e-6


def test_recovery_lower_bound_shadow(radial_table):
    for r in radial_table.rows:
        assert r.energy.total >= radial_table.limit.breakdown.total - 5e-3


def test_recovery_inflation_vanishes(radial_table):
    infl = [r.annulus_inflation for r in radial_table.rows]
    assert all(b <= a * 1.10 for a, b in zip(infl, infl[1:]))
    assert infl[-1] < infl[0]


def test_recovery_trace_identity_is_parametric():
    # the pushed trace at eps and the original at r are the same curve
    y = example_radial(0.5)
    eps = 0.1
    phi = build_phi(eps, default_r_rule(eps, 1), 1)
    push = build_push(phi, y.singular_points, domain=y.domain)
    ytil = compose(y, push)
    ca = trace_on_circle(ytil, (0, 0), eps, 512)
    cb = trace_on_circle(y, (0, 0), phi.r_n, 512)
    assert np.allclose(ca.points, cb.points, atol=1e-14)
    assert np.allclose(ca.derivs, cb.derivs, atol=1e-12)
    assert cavity_volume(ca) == pytest.approx(cavity_volume(cb), rel=1e-12)
    assert cavity_perimeter(ca) == pytest.approx(cavity_perimeter(cb), rel=1e-12)


def test_recovery_spike_flagged_but_produced():
    y = example_spike()
    table = recovery_energy_table(y, y.singular_points, [0.2, 0.1, 0.05],
                                  DENS, LAMBDAS)
    assert not table.conv_perimeter_ok
    assert len(table.rows) == 3
    f = table.limit.flaws[0]
    assert f.perimeter == pytest.approx(math.pi + 1.0, abs=2e-2)
    assert f.perimeter_reduced_boundary == pytest.approx(math.pi, abs=0)
