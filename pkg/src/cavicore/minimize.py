"""Radially reduced minimization of the core-radius energy, flaw-point search
on candidate grids, and the vanishing-core sweep harness."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cavity import extrapolate_limit
from .deformation import RadialProfile
from .energy import Density, EnergyBreakdown
from .geometry import Confinement, Domain, FlawConfig, validate_flaw_config

DELTA_MIN = 1e-8  # monotonicity gap keeping det > 0 strictly

_GX, _GW = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class RadialProblem:
    """One-dimensional reduction of the core-radius energy to radial maps
    rho on [eps, outer_radius] with rho(outer_radius) = boundary_value."""

    eps: float
    outer_radius: float
    boundary_value: float
    density: Density
    lambdas: tuple[float, float]
    K: int = 16

    def __post_init__(self):
        if not self.eps < self.outer_radius:
            raise ValueError("eps must be below outer_radius")
        if self.boundary_value <= 0:
            raise ValueError("boundary_value must be positive")
        if self.K < 8:
            raise ValueError("need at least 8 profile segments")

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.eps, self.outer_radius, self.K + 1)


def _w_all_diag(a, d, density: Density):
    """W and first/second partials at F = diag(a, d) for the isotropic
    densities shipped here (both are functions of |F| and det F)."""
    det = a * d
    fro = np.sqrt(a * a + d * d)
    p = density.p
    A = p * fro ** (p - 2.0)
    B = p * (p - 2.0) * fro ** (p - 4.0)
    if density.name == "standard":
        W = fro**p + (det - 1.0) ** 2 + 1.0 / det
        fp = 2.0 * (det - 1.0) - 1.0 / det**2
        fpp = 2.0 + 2.0 / det**3
    elif density.name == "subquadratic":
        W = fro**p + det * np.log(det) + 1.0 / det - 1.0
        fp = np.log(det) + 1.0 - 1.0 / det**2
        fpp = 1.0 / det + 2.0 / det**3
    else:  # generic: value/derivative via the density callables
        F = np.zeros(np.shape(a) + (2, 2))
        F[..., 0, 0] = a
        F[..., 1, 1] = d
        W = density.w(F)
        DW = density.dw(F)
        return W, DW[..., 0, 0], DW[..., 1, 1], None, None, None
    Wa = A * a + fp * d
    Wd = A * d + fp * a
    Waa = B * a * a + A + fpp * d * d
    Wdd = B * d * d + A + fpp * a * a
    Wad = B * a * d + fpp * a * d + fp
    return W, Wa, Wd, Waa, Wad, Wdd


def _segment_frame(nodes, vals):
    h = np.diff(nodes)
    slope = np.diff(vals) / h
    R = nodes[:-1, None] + (0.5 * (_GX + 1.0))[None, :] * h[:, None]
    theta = (R - nodes[:-1, None]) / h[:, None]
    rho = vals[:-1, None] * (1.0 - theta) + vals[1:, None] * theta
    wq = 2.0 * math.pi * R * (0.5 * h[:, None] * _GW[None, :])
    return h, slope, R, theta, rho, wq


def radial_reduced_energy(profile: RadialProfile, prob: RadialProblem) -> EnergyBreakdown:
    """Energy of the lifted radial map: per-segment Gauss quadrature of
    W(diag(rho', rho/R)) with weight 2 pi R, plus the circle cavity terms
    pi rho(eps)^2 and 2 pi rho(eps)."""
    nodes = np.asarray(profile.nodes, dtype=float)
    vals = np.asarray(profile.values, dtype=float)
    if abs(nodes[0] - prob.eps) > 1e-12 or abs(nodes[-1] - prob.outer_radius) > 1e-12:
        raise ValueError("profile nodes must span [eps, outer_radius]")
    h, slope, R, theta, rho, wq = _segment_frame(nodes, vals)
    W = _w_all_diag(slope[:, None] + 0.0 * R, rho / R, prob.density)[0]
    el = float(np.sum(W * wq))
    r0 = vals[0]
    return EnergyBreakdown.assemble(el, math.pi * r0**2, 2.0 * math.pi * r0,
                                    prob.lambdas)


def _energy_and_grad(nodes, vals, prob: RadialProblem, need_precond=True):
    h, slope, R, theta, rho, wq = _segment_frame(nodes, vals)
    a = slope[:, None] + 0.0 * R
    d = rho / R
    W, Wa, Wd, Waa, Wad, Wdd = _w_all_diag(a, d, prob.density)
    lv, lp = prob.lambdas
    E = float(np.sum(W * wq)) + lv * math.pi * vals[0] ** 2 + lp * 2.0 * math.pi * vals[0]
    K = len(nodes) - 1
    g = np.zeros(K + 1)
    dal = -1.0 / h[:, None] + 0.0 * R
    dar = +1.0 / h[:, None] + 0.0 * R
    ddl = (1.0 - theta) / R
    ddr = theta / R
    g[:-1] += np.sum((Wa * dal + Wd * ddl) * wq, axis=1)
    g[1:] += np.sum((Wa * dar + Wd * ddr) * wq, axis=1)
    g[0] += lv * 2.0 * math.pi * vals[0] + lp * 2.0 * math.pi
    D = None
    if need_precond and Waa is not None:
        D = np.zeros(K + 1)
        D[:-1] += np.sum((Waa * dal**2 + 2 * Wad * dal * ddl + Wdd * ddl**2) * wq, axis=1)
        D[1:] += np.sum((Waa * dar**2 + 2 * Wad * dar * ddr + Wdd * ddr**2) * wq, axis=1)
        D[0] += lv * 2.0 * math.pi
        D = np.maximum(np.abs(D), 1e-10)
    return E, g, D


def _pava(u, w):
    """Weighted pool-adjacent-violators; returns the isotonic regression."""
    v: list[float] = []
    ww: list[float] = []
    cnt: list[int] = []
    for ui, wi in zip(u, w):
        v.append(float(ui))
        ww.append(float(wi))
        cnt.append(1)
        while len(v) > 1 and v[-2] > v[-1]:
            v2, w2, c2 = v.pop(), ww.pop(), cnt.pop()
            v1, w1, c1 = v.pop(), ww.pop(), cnt.pop()
            v.append((v1 * w1 + v2 * w2) / (w1 + w2))
            ww.append(w1 + w2)
            cnt.append(c1 + c2)
    return np.repeat(v, cnt)


def _project_free(free, bv, weights=None):
    """Project the free profile values (boundary node excluded) onto the
    monotone cone with DELTA_MIN gaps, floored at DELTA_MIN and capped below
    the boundary value. Exact metric projection via (weighted) PAVA + clip."""
    K = len(free)
    k = np.arange(K, dtype=float)
    u = free - k * DELTA_MIN
    u = _pava(u, np.ones(K) if weights is None else weights)
    u = np.clip(u, DELTA_MIN, bv - (K) * DELTA_MIN)
    return u + k * DELTA_MIN


@dataclass
class MinimizeResult:
    profile: RadialProfile
    energy: EnergyBreakdown
    iterations: int
    converged: bool
    pg_norm: float
    status: str
    energy_trace: np.ndarray = field(repr=False, default=None)


def _descend(prob: RadialProblem, init_free, tol, max_iter):
    nodes = prob.nodes
    bv = prob.boundary_value
    free = _project_free(np.asarray(init_free, dtype=float), bv)
    vals = np.append(free, bv)
    E, g, D = _energy_and_grad(nodes, vals, prob)
    g = g[:-1]
    D = D[:-1] if D is not None else np.ones_like(free)
    alpha = 1.0
    trace = [E]
    stall = 0
    it = 0
    status = "max-iterations"
    while it < max_iter:
        it += 1
        pg = free - _project_free(free - g, bv)
        pg_norm = float(np.linalg.norm(pg))
        if pg_norm < tol:
            status = "converged"
            break
        a = alpha
        accepted = False
        for _ in range(80):
            cand = _project_free(free - a * g / D, bv, weights=D)
            Ec = _energy_and_grad(nodes, np.append(cand, bv), prob,
                                  need_precond=False)[0]
            dec = float(np.dot(g, free - cand))
            if Ec <= E - 1e-4 * dec:
                accepted = True
                break
            a *= 0.5
        if not accepted:
            status = "line-search-stalled"
            break
        Enew, gnew, Dnew = _energy_and_grad(nodes, np.append(cand, bv), prob)
        gnew = gnew[:-1]
        Dnew = Dnew[:-1] if Dnew is not None else D
        s = cand - free
        yv = gnew - g
        sy = float(np.dot(s, yv))
        sDs = float(np.dot(s, D * s))
        alpha = min(max(sDs / sy if sy > 1e-30 else 2.0 * a, 1e-12), 1e10)
        if E - Enew <= 1e-15 * (1.0 + abs(E)):
            stall += 1
            if stall >= 50:
                status = "stalled"
                free, E, g, D = cand, Enew, gnew, Dnew
                trace.append(E)
                break
        else:
            stall = 0
        free, E, g, D = cand, Enew, gnew, Dnew
        trace.append(E)
    pg = free - _project_free(free - g, bv)
    return free, E, it, float(np.linalg.norm(pg)), status, np.asarray(trace)


def _default_inits(prob: RadialProblem):
    nodes = prob.nodes
    bv = prob.boundary_value
    K = prob.K
    # affine between a trial cavity radius and the boundary value
    yield np.linspace(0.5 * bv, bv, K + 1)[:-1]
    # cavity-free affine continuation of the boundary stretch
    stretch = bv / prob.outer_radius
    yield (stretch * nodes)[:-1]
    # near-closed cavity
    yield np.linspace(16 * DELTA_MIN, bv, K + 1)[:-1]


def minimize_radial(prob: RadialProblem, *, tol: float = 1e-7,
                    max_iter: int = 100_000, init=None,
                    multistart: bool = True) -> MinimizeResult:
    """Projected-gradient descent (diagonally preconditioned, Barzilai-Borwein
    step, monotone Armijo backtracking) over monotone radial profiles.

    The projection is exact (weighted isotonic regression with a DELTA_MIN
    gap). With multistart the descent is run from each standard initial
    profile and the best final energy is returned; each run's energy trace is
    nonincreasing. Non-convergence is flagged, never raised."""
    inits = [np.asarray(init, dtype=float)[: prob.K]] if init is not None else []
    if multistart or init is None:
        inits.extend(_default_inits(prob))
    best = None
    for f0 in inits:
        free, E, it, pgn, status, trace = _descend(prob, f0, tol, max_iter)
        better = best is None or E < best[1] - 1e-12 * (1.0 + abs(E)) or (
            abs(E - best[1]) <= 1e-12 * (1.0 + abs(E))
            and status == "converged" and best[4] != "converged")
        if better:
            best = (free, E, it, pgn, status, trace)
    free, E, it, pgn, status, trace = best
    profile = RadialProfile(nodes=prob.nodes, values=np.append(free, prob.boundary_value))
    bd = radial_reduced_energy(profile, prob)
    return MinimizeResult(profile=profile, energy=bd, iterations=it,
                          converged=status == "converged", pg_norm=pgn,
                          status=status, energy_trace=trace)


# --------------------------------------------------------------------------
# flaw-point search


@dataclass(frozen=True)
class FlawCandidate:
    center: tuple[float, float]
    valid: bool
    reason: str
    energy_total: float | None
    result: MinimizeResult | None


@dataclass(frozen=True)
class FlawSearchResult:
    best: FlawCandidate
    table: tuple[FlawCandidate, ...]


def flaw_search(candidates, outer: Domain, confinement: Confinement,
                eps: float, stretch: float, density: Density, lambdas,
                *, K: int = 16, tol: float = 1e-7,
                max_iter: int = 20_000) -> FlawSearchResult:
    """Exhaustive single-flaw search over candidate centers.

    Each candidate re-centers the radial problem on the largest disk around
    it inside the domain; outside that disk the deformation is the uniform
    stretch, so candidate energies are comparable over the same body:
    total = radial minimum + W(stretch I) * (|Omega| - pi R_a^2)."""
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    w_ambient = float(density.w(stretch * np.eye(2)))
    area = outer.area()
    rows: list[FlawCandidate] = []
    for a in candidates:
        cfg = FlawConfig(points=a[None, :], eps=eps, max_count=1,
                         confinement=confinement)
        rep = validate_flaw_config(cfg, outer)
        if not rep.ok:
            rows.append(FlawCandidate(center=(float(a[0]), float(a[1])),
                                      valid=False, reason=str(rep),
                                      energy_total=None, result=None))
            continue
        Ra = float(outer.dist_to_boundary(a))
        prob = RadialProblem(eps=eps, outer_radius=Ra,
                             boundary_value=stretch * Ra, density=density,
                             lambdas=lambdas, K=K)
        res = minimize_radial(prob, tol=tol, max_iter=max_iter)
        total = res.energy.total + w_ambient * (area - math.pi * Ra**2)
        rows.append(FlawCandidate(center=(float(a[0]), float(a[1])), valid=True,
                                  reason="", energy_total=total, result=res))
    valid = [r for r in rows if r.valid]
    if not valid:
        raise ValueError("no valid candidate centers")
    best = min(valid, key=lambda r: r.energy_total)
    return FlawSearchResult(best=best, table=tuple(rows))


# --------------------------------------------------------------------------
# vanishing-core sweep


@dataclass(frozen=True)
class SweepRow:
    eps: float
    min_energy: EnergyBreakdown
    cavity_radius: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class GammaSweep:
    rows: tuple[SweepRow, ...]
    limit_estimate: float
    limit_uncertainty: float
    gaps: tuple[float, ...]


def gamma_sweep(eps_list, prob_template: RadialProblem, *, tol: float = 1e-7,
                max_iter: int = 20_000) -> GammaSweep:
    """Minimize at each core radius with warm starts, then extrapolate the
    minimum energies to the vanishing-core limit and report the gap
    sequence |E(eps) - E_limit|."""
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 3 or any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("need at least three strictly decreasing core radii")
    rows: list[SweepRow] = []
    warm = None
    warm_profile = None
    for eps in eps_list:
        prob = RadialProblem(eps=eps, outer_radius=prob_template.outer_radius,
                             boundary_value=prob_template.boundary_value,
                             density=prob_template.density,
                             lambdas=prob_template.lambdas, K=prob_template.K)
        init = None
        if warm_profile is not None:
            init = np.interp(prob.nodes[:-1], warm_profile.nodes,
                             warm_profile.values)
        res = minimize_radial(prob, tol=tol, max_iter=max_iter, init=init)
        warm_profile = res.profile
        rows.append(SweepRow(eps=eps, min_energy=res.energy,
                             cavity_radius=res.profile.cavity_radius,
                             iterations=res.iterations, converged=res.converged))
    energies = np.array([r.min_energy.total for r in rows])
    limit, unc = extrapolate_limit(np.array(eps_list), energies)
    gaps = tuple(float(abs(e - limit)) for e in energies)
    return GammaSweep(rows=tuple(rows), limit_estimate=float(limit),
                      limit_uncertainty=float(unc), gaps=gaps)
