import math

import numpy as np
import pytest

from cavicore.cavity import cavity_perimeter, cavity_volume, trace_on_circle
from cavicore.deformation import (
    Deformation,
    RadialProfile,
    example_radial,
    example_spike,
    identity_deformation,
    radial_deformation,
)
from cavicore.energy import (
    EnergyBreakdown,
    bump,
    check_admissibility_sampled,
    default_density,
    density_by_name,
    elastic_energy,
    extended_det_pairing,
    limit_energy,
    regularized_energy,
    stress_control_constant,
    subquadratic_density,
)
from cavicore.geometry import Domain, FlawConfig, det2, tight_confinement


def _random_matrices(rng, n, det_lo=0.2, det_hi=5.0):
    """Random 2x2 matrices rescaled to a prescribed positive determinant."""
    out = np.empty((n, 2, 2))
    targets = rng.uniform(det_lo, det_hi, n)
    k = 0
    while k < n:
        F = rng.normal(size=(2, 2))
        d = F[0, 0] * F[1, 1] - F[0, 1] * F[1, 0]
        if abs(d) < 1e-3:
            continue
        if d < 0:
            F = F[:, ::-1].copy()
            d = -d
        out[k] = F * math.sqrt(targets[k] / d)
        k += 1
    return out


# --------------------------------------------------------------------------
# densities


def test_default_density_values():
    dens = default_density(2.0)
    assert dens.w(np.eye(2)) == pytest.approx(3.0, abs=1e-15)
    assert dens.w(np.diag([2.0, 0.5])) == pytest.approx(5.25, abs=1e-12)
    assert dens.w(np.diag([1.0, -1.0])) == math.inf


def test_default_density_rejects_small_p():
    with pytest.raises(ValueError):
        default_density(1.5)
    with pytest.raises(ValueError):
        subquadratic_density(2.5)


def test_density_by_name():
    assert density_by_name("standard", 2.0).name == "standard"
    assert density_by_name("subquadratic", 1.3).name == "subquadratic"
    with pytest.raises(KeyError):
        density_by_name("nope", 2.0)


@pytest.mark.parametrize("dens", [default_density(2.0), default_density(3.0),
                                  subquadratic_density(1.1),
                                  subquadratic_density(1.5)])
def test_density_derivative_vs_fd(dens, rng):
    Fs = _random_matrices(rng, 500)
    D = dens.dw(Fs)
    h = 1e-6
    for i in range(2):
        for j in range(2):
            E = np.zeros((2, 2))
            E[i, j] = h
            fd = (dens.w(Fs + E) - dens.w(Fs - E)) / (2 * h)
            scale = np.maximum(np.abs(dens.w(Fs)), 1.0)
            assert np.max(np.abs(D[..., i, j] - fd) / scale) <= 1e-6


@pytest.mark.parametrize("dens", [default_density(2.0), subquadratic_density(1.1)])
def test_density_growth_and_coercivity(dens, rng):
    Fs = _random_matrices(rng, 300)
    w = dens.w(Fs)
    fro = np.sqrt(np.sum(Fs * Fs, axis=(1, 2)))
    lower = dens.c * fro**dens.p + dens.g(det2(Fs))
    assert np.all(w >= lower - 1e-12 * np.maximum(w, 1.0))
    # volumetric blowup at collapse and superlinear growth at infinity
    assert dens.g(1e-6) >= 1e3
    assert dens.g(1e6) / 1e6 >= 10.0


def test_stress_control_constant(rng):
    dens = default_density(2.0)
    Fs = _random_matrices(rng, 400)
    const = stress_control_constant(dens, Fs)
    assert np.isfinite(const)
    assert const <= 10.0


# --------------------------------------------------------------------------
# energy breakdown


def test_breakdown_additivity_and_monotonicity():
    bd = EnergyBreakdown.assemble(1.5, 0.3, 0.7, (2.0, 4.0))
    assert bd.total == pytest.approx(bd.elastic + bd.volume_term + bd.perimeter_term,
                                     abs=1e-12)
    for lv, lp in [(3.0, 4.0), (2.0, 5.0), (6.0, 8.0)]:
        assert EnergyBreakdown.assemble(1.5, 0.3, 0.7, (lv, lp)).total >= bd.total


# --------------------------------------------------------------------------
# elastic energy


def test_elastic_identity_annulus_and_ball():
    dens = default_density(2.0)
    idm = identity_deformation()
    annulus = Domain(q=2, radius=1.0, flaws=FlawConfig(points=[[0, 0]], eps=0.5))
    assert elastic_energy(idm, annulus, dens) == pytest.approx(2.25 * math.pi,
                                                               rel=1e-9)
    ball = Domain(q=2, radius=1.0)
    assert elastic_energy(idm, ball, dens) == pytest.approx(3 * math.pi, rel=1e-9)


def test_elastic_refinement_stability():
    # the converged value agrees with a one-shot high-resolution reference
    from cavicore.energy import _integrate_perforated

    dens = default_density(2.0)
    y = example_radial(0.5)
    dom = Domain(q=1, radius=1.0, flaws=FlawConfig(points=[[0, 0]], eps=0.3))
    a = elastic_energy(y, dom, dens, tol=1e-6)
    ref, _ = _integrate_perforated(lambda X: dens.w(y.grad(X)), dom, dom.flaws,
                                   y, nt=8192, nsub=32)
    assert abs(a - ref) <= 2e-6 * abs(ref)


def test_elastic_offcenter_flaw_partition_of_unity():
    # off-center hole: partition-of-unity path against the exact area integral
    dens = default_density(2.0)
    idm = identity_deformation()
    dom = Domain(q=2, radius=1.0,
                 flaws=FlawConfig(points=[[0.3, 0.1]], eps=0.12))
    expect = 3.0 * (math.pi - math.pi * 0.12**2)
    assert elastic_energy(idm, dom, dens, tol=1e-6) == pytest.approx(expect, rel=1e-6)


def test_elastic_two_flaws():
    dens = default_density(2.0)
    idm = identity_deformation()
    dom = Domain(q=2, radius=1.0,
                 flaws=FlawConfig(points=[[-0.4, 0.0], [0.4, 0.0]], eps=0.1,
                                  max_count=2))
    expect = 3.0 * (math.pi - 2 * math.pi * 0.01)
    assert elastic_energy(idm, dom, dens, tol=1e-6) == pytest.approx(expect, rel=1e-6)


# --------------------------------------------------------------------------
# regularized energy


def test_regularized_consistency_with_cavity_module():
    y = example_radial(0.5)
    cfg = FlawConfig(points=[[0, 0]], eps=0.1, max_count=1,
                     confinement=tight_confinement([[0, 0]]))
    dens = subquadratic_density(1.5)
    bd = regularized_energy(y, cfg, y.domain, dens, (1.0, 1.0))
    c = trace_on_circle(y, (0, 0), 0.1, 2**14)
    assert bd.volume_term == pytest.approx(cavity_volume(c), rel=1e-6)
    assert bd.perimeter_term == pytest.approx(cavity_perimeter(c), rel=1e-6)


def test_regularized_lambda_zero_is_elastic_only():
    y = example_radial(0.5)
    cfg = FlawConfig(points=[[0, 0]], eps=0.1, max_count=1,
                     confinement=tight_confinement([[0, 0]]))
    dens = subquadratic_density(1.5)
    bd = regularized_energy(y, cfg, y.domain, dens, (0.0, 0.0))
    assert bd.volume_term == 0.0 and bd.perimeter_term == 0.0
    assert bd.total == bd.elastic


def test_regularized_radial_profile_circle_geometry():
    prof = RadialProfile(nodes=np.linspace(0.2, 1.0, 9),
                         values=np.linspace(0.5, 1.0, 9))
    y = radial_deformation(prof)
    cfg = FlawConfig(points=[[0, 0]], eps=0.2, max_count=1,
                     confinement=tight_confinement([[0, 0]]))
    dens = default_density(2.0)
    bd = regularized_energy(y, cfg, Domain(q=2, radius=1.0), dens, (2.0, 3.0))
    assert bd.volume_term == pytest.approx(2.0 * math.pi * 0.25, rel=1e-8)
    assert bd.perimeter_term == pytest.approx(3.0 * 2 * math.pi * 0.5, rel=1e-8)


def test_regularized_rejects_invalid_config():
    y = example_radial(0.5)
    cfg = FlawConfig(points=[[0, 0], [0.1, 0]], eps=0.1, max_count=2,
                     confinement=tight_confinement([[0, 0], [0.1, 0]]))
    with pytest.raises(ValueError):
        regularized_energy(y, cfg, y.domain, subquadratic_density(1.5), (1, 1))


# --------------------------------------------------------------------------
# limit energy


def test_limit_energy_radial_example():
    y = example_radial(0.5)
    rep = limit_energy(y, y.singular_points, y.domain, subquadratic_density(1.1),
                       (1.0, 1.0), [0.2, 0.1, 0.05, 0.025])
    f = rep.flaws[0]
    assert f.volume == pytest.approx(0.5, abs=1e-4)
    assert f.perimeter == pytest.approx(2 * math.sqrt(2), abs=1e-3)
    assert f.conv_perimeter_ok is True
    assert not rep.conv_perimeter_violated
    assert f.has_cavity


def test_limit_energy_spike_flags_violation():
    y = example_spike()
    rep = limit_energy(y, y.singular_points, y.domain, subquadratic_density(1.1),
                       (1.0, 1.0), [0.2, 0.1, 0.05, 0.025])
    f = rep.flaws[0]
    assert f.conv_perimeter_ok is False
    assert rep.conv_perimeter_violated
    assert "conv-perimeter-violated" in rep.flags
    assert f.perimeter == pytest.approx(math.pi + 1.0, abs=1e-2)
    assert f.perimeter_reduced_boundary == pytest.approx(math.pi, abs=0)


def test_limit_energy_no_flaws():
    idm = identity_deformation()
    rep = limit_energy(idm, np.zeros((0, 2)), Domain(q=2, radius=1.0),
                       default_density(2.0), (1.0, 1.0), [0.2, 0.1, 0.05])
    assert rep.breakdown.volume_term == 0.0
    assert rep.breakdown.perimeter_term == 0.0
    assert rep.breakdown.elastic == pytest.approx(3 * math.pi, rel=1e-6)


# --------------------------------------------------------------------------
# determinant pairing


def test_pairing_identity_closed_form():
    idm = identity_deformation()
    cfg = FlawConfig(points=[[0, 0]], eps=0.3, max_count=1,
                     confinement=tight_confinement([[0, 0]]))
    res = extended_det_pairing(idm, cfg, Domain(q=2, radius=1.0), bump(2))
    expect = math.pi * (1 - 0.3**2) ** 3 / 3.0
    assert res.pairing == pytest.approx(expect, abs=1e-6)
    assert res.det_integral == pytest.approx(expect, abs=1e-6)


def test_pairing_support_away_from_flaw():
    # bump supported away from the hole: the sphere term vanishes and the
    # pairing is the plain integral of the test function
    idm = identity_deformation()
    cfg = FlawConfig(points=[[0, 0]], eps=0.1, max_count=1,
                     confinement=tight_confinement([[0, 0]]))
    phi = bump(2, radius=0.25, center=(0.55, 0.0))
    res = extended_det_pairing(idm, cfg, Domain(q=2, radius=1.0), phi)
    exact = math.pi * 0.25**2 / 3.0  # integral of (1-|u|^2)^2 over the unit disk, scaled
    assert abs(res.sphere_term) <= 1e-12
    assert res.pairing == pytest.approx(exact, rel=1e-6)


def test_pairing_radial_example_identity():
    y = example_radial(0.5)
    cfg = FlawConfig(points=[[0, 0]], eps=0.15, max_count=1,
                     confinement=tight_confinement([[0, 0]]))
    for k in (2, 3, 4):
        res = extended_det_pairing(y, cfg, y.domain, bump(k, radius=0.7))
        assert res.residual_rel <= 1e-4


# --------------------------------------------------------------------------
# admissibility report


def test_admissibility_radial_example_passes():
    y = example_radial(0.5)
    cfg = FlawConfig(points=[[0, 0]], eps=0.1, max_count=1,
                     confinement=tight_confinement([[0, 0]]))
    rep = check_admissibility_sampled(y, cfg, y.domain, [0.25, 0.4], seed=1)
    assert rep.ok, str(rep)


def test_admissibility_detects_folding():
    def ev(x):
        x = np.asarray(x, dtype=float)
        out = x.copy()
        out[..., 0] = np.abs(x[..., 0])
        return out

    def gr(x):
        x = np.asarray(x, dtype=float)
        out = np.broadcast_to(np.eye(2), x.shape[:-1] + (2, 2)).copy()
        out[..., 0, 0] = np.where(x[..., 0] >= 0, 1.0, -1.0)
        return out

    fold = Deformation(eval=ev, grad=gr, domain=Domain(q=2, radius=1.0),
                       name="fold")
    cfg = FlawConfig(points=[[0, 0]], eps=0.1, max_count=1,
                     confinement=tight_confinement([[0, 0]]))
    rep = check_admissibility_sampled(fold, cfg, fold.domain, [0.3], seed=1)
    orientation = next(r for r in rep.rows if r.name == "orientation")
    assert not orientation.passed
    assert not rep.ok


def test_admissibility_identity_no_flaws():
    idm = identity_deformation()
    idm.domain = Domain(q=2, radius=1.0)
    cfg = FlawConfig(points=np.zeros((0, 2)), eps=0.1, max_count=1)
    rep = check_admissibility_sampled(idm, cfg, idm.domain, [0.3], seed=2)
    assert rep.ok, str(rep)
