"""Stored-energy densities, bulk quadrature on perforated domains, the
regularized and limit energies, the perforation-aware determinant pairing,
and sampled admissibility checks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .cavity import (
    INSIDE,
    NEAR_BOUNDARY,
    OUTSIDE,
    converged_trace_metrics,
    degree_range_on_grid,
    extrapolate_limit,
    topological_image_contains,
    trace_on_circle,
)
from .deformation import Deformation
from .geometry import Domain, FlawConfig, adj2, det2, validate_flaw_config

TWO_PI = 2.0 * math.pi


class QuadratureError(RuntimeError):
    """Bulk quadrature failed to converge (typically a non-integrable
    singularity inside the integration region)."""


# --------------------------------------------------------------------------
# stored-energy densities


@dataclass(frozen=True)
class Density:
    """Stored-energy density W with exact derivative and coercivity minorant.

    w and dw are vectorized over (..., 2, 2) matrix stacks; w returns +inf
    off the orientation-preserving cone. g is the volumetric minorant with
    g -> inf at 0+ and superlinear growth.
    """

    name: str
    p: float
    w: Callable[[np.ndarray], np.ndarray]
    dw: Callable[[np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]
    c: float = 1.0
    c0: float = 1.0
    c1: float = 10.0


def _frob(F):
    return np.sqrt(np.sum(F * F, axis=(-2, -1)))


def default_density(p: float) -> Density:
    """|F|^p + (det F - 1)^2 + 1/det F on the orientation-preserving cone.

    Polyconvex, with volumetric minorant g(t) = (t-1)^2 + 1/t. Requires
    p >= 2."""
    if p < 2:
        raise ValueError("default density requires p >= 2")

    def g(t):
        t = np.asarray(t, dtype=float)
        return np.where(t > 0, (t - 1.0) ** 2 + 1.0 / np.where(t > 0, t, 1.0), np.inf)

    def w(F):
        F = np.asarray(F, dtype=float)
        d = det2(F)
        safe = np.where(d > 0, d, 1.0)
        val = _frob(F) ** p + (safe - 1.0) ** 2 + 1.0 / safe
        return np.where(d > 0, val, np.inf)

    def dw(F):
        F = np.asarray(F, dtype=float)
        d = det2(F)
        safe = np.where(d > 0, d, 1.0)[..., None, None]
        fro = _frob(F)[..., None, None]
        cof = np.empty_like(F)
        cof[..., 0, 0] = F[..., 1, 1]
        cof[..., 0, 1] = -F[..., 1, 0]
        cof[..., 1, 0] = -F[..., 0, 1]
        cof[..., 1, 1] = F[..., 0, 0]
        return p * fro ** (p - 2.0) * F + (2.0 * (safe - 1.0) - 1.0 / safe**2) * cof

    return Density(name="standard", p=p, w=w, dw=dw, g=g)


def subquadratic_density(p: float) -> Density:
    """|F|^p + det F ln det F + 1/det F - 1, for 1 < p < 2.

    The subquadratic growth keeps the bulk energy of conical cavitating maps
    integrable, which the quadratic-determinant density does not."""
    if not 1.0 < p < 2.0:
        raise ValueError("subquadratic density requires 1 < p < 2")

    def g(t):
        t = np.asarray(t, dtype=float)
        safe = np.where(t > 0, t, 1.0)
        return np.where(t > 0, safe * np.log(safe) + 1.0 / safe - 1.0, np.inf)

    def w(F):
        F = np.asarray(F, dtype=float)
        d = det2(F)
        return np.where(d > 0, _frob(F) ** p + g(d), np.inf)

    def dw(F):
        F = np.asarray(F, dtype=float)
        d = det2(F)
        safe = np.where(d > 0, d, 1.0)[..., None, None]
        fro = _frob(F)[..., None, None]
        cof = np.empty_like(F)
        cof[..., 0, 0] = F[..., 1, 1]
        cof[..., 0, 1] = -F[..., 1, 0]
        cof[..., 1, 0] = -F[..., 0, 1]
        cof[..., 1, 1] = F[..., 0, 0]
        return p * fro ** (p - 2.0) * F + (np.log(safe) + 1.0 - 1.0 / safe**2) * cof

    return Density(name="subquadratic", p=p, w=w, dw=dw, g=g)


DENSITY_FACTORIES = {"standard": default_density, "subquadratic": subquadratic_density}


def density_by_name(name: str, p: float) -> Density:
    try:
        return DENSITY_FACTORIES[name](p)
    except KeyError:
        raise KeyError(f"unknown density {name!r}; choose from {sorted(DENSITY_FACTORIES)}")


def stress_control_constant(density: Density, Fs) -> float:
    """Sampled sup of |F^T DW(F)| / (W(F) + c0)."""
    Fs = np.asarray(Fs, dtype=float)
    FtDW = np.swapaxes(Fs, -1, -2) @ density.dw(Fs)
    num = _frob(FtDW)
    den = density.w(Fs) + density.c0
    return float(np.max(num / den))


# --------------------------------------------------------------------------
# energy breakdown container


@dataclass(frozen=True)
class EnergyBreakdown:
    """Elastic + weighted cavity-volume + weighted cavity-perimeter terms."""

    elastic: float
    volume_term: float
    perimeter_term: float
    total: float
    lambdas: tuple[float, float]

    @classmethod
    def assemble(cls, elastic, volume_sum, perimeter_sum, lambdas):
        lv, lp = lambdas
        vt = lv * volume_sum
        pt = lp * perimeter_sum
        return cls(elastic=float(elastic), volume_term=float(vt),
                   perimeter_term=float(pt), total=float(elastic + vt + pt),
                   lambdas=(float(lv), float(lp)))


# --------------------------------------------------------------------------
# bulk quadrature in q-radial coordinates
#
# The outer q-ball is parametrized by x = s * u(t) with u(t) the q-unit
# direction; the area element is (s / kappa(t)^2) ds dt with
# kappa(t) = |(cos t, sin t)|_q. Euclidean holes centered at the origin
# become exact radial limits s >= eps * kappa(t).

_GAUSS = {}


def _gauss(n):
    if n not in _GAUSS:
        _GAUSS[n] = np.polynomial.legendre.leggauss(n)
    return _GAUSS[n]


def _kappa(q, t):
    c, s = np.cos(t), np.sin(t)
    if q == 1:
        return np.abs(c) + np.abs(s)
    if q == 2:
        return np.ones_like(t)
    if math.isinf(q):
        return np.maximum(np.abs(c), np.abs(s))
    return (np.abs(c) ** q + np.abs(s) ** q) ** (1.0 / q)


def _segment_sum(f, center, u, jac_t, wt, bounds, nsub, ng):
    """Integrate f over radial segments [bounds[:, j], bounds[:, j+1]] per
    angle, each split into nsub Gauss-ng panels. bounds has shape (nt, m)."""
    gx, gw = _gauss(ng)
    total = 0.0
    nt, m = bounds.shape
    for j in range(m - 1):
        lo = bounds[:, j]
        hi = bounds[:, j + 1]
        width = (hi - lo) / nsub
        if np.all(width <= 0):
            continue
        edges = lo[:, None] + width[:, None] * np.arange(nsub)[None, :]
        mid = edges[..., None] + 0.5 * width[:, None, None] * (gx + 1.0)
        ws = 0.5 * width[:, None, None] * gw
        X = center + mid[..., None] * u[:, None, None, :]
        vals = f(X)
        total += float(np.sum(vals * mid * ws * (jac_t * wt)[:, None, None]))
    return total


def _dyadic_sum(f, center, u, jac_t, wt, hi, ng, abs_tol, max_levels=60):
    """Integrate f over s in (0, hi] with dyadic panels toward 0; returns
    (value, converged)."""
    gx, gw = _gauss(ng)
    total = 0.0
    top = hi.copy()
    last = np.inf
    for _ in range(max_levels):
        lo = top / 2.0
        mid = lo[:, None] + 0.5 * (top - lo)[:, None] * (gx + 1.0)
        ws = 0.5 * (top - lo)[:, None] * gw
        X = center + mid[..., None] * u[:, None, :]
        vals = f(X)
        last = float(np.sum(vals * mid * ws * (jac_t * wt)[:, None]))
        total += last
        top = lo
        if abs(last) < abs_tol:
            return total, True
    return total, abs(last) < abs_tol


def _ray_circle_crossings(t, ccenter, R, origin=(0.0, 0.0)):
    """Euclidean radii where rays from `origin` with angles t cross the circle
    |x - ccenter| = R; non-crossing rays get zeros (dropped by clipping)."""
    c = np.asarray(ccenter, dtype=float) - np.asarray(origin, dtype=float)
    proj = np.cos(t) * c[0] + np.sin(t) * c[1]
    disc = proj**2 - (c @ c - R * R)
    root = np.sqrt(np.maximum(disc, 0.0))
    hit = disc > 0
    lo = np.where(hit, proj - root, 0.0)
    hi = np.where(hit, proj + root, 0.0)
    return np.stack([lo, hi], axis=-1)


def integrate_q_ball(
    f,
    domain: Domain,
    *,
    hole_eps: float = 0.0,
    singular_center: bool = False,
    breaks: Callable[[float], list] | None = None,
    circles: list | None = None,
    nt: int = 512,
    nsub: int = 4,
    ng: int = 8,
    abs_tol: float = 1e-12,
):
    """One quadrature pass of f over the q-ball, minus a centered Euclidean
    hole of radius hole_eps, with optional per-ray breakpoints, ray splits at
    declared circles, and dyadic grading toward a singular center. Returns
    (value, converged)."""
    t = (np.arange(nt) + 0.5) * (TWO_PI / nt)
    wt = TWO_PI / nt
    kap = _kappa(domain.q, t)
    u = np.stack([np.cos(t), np.sin(t)], axis=-1) / kap[:, None]
    jac_t = 1.0 / kap**2
    s_hi = np.full(nt, domain.radius)
    s_lo = hole_eps * kap if hole_eps > 0 else np.zeros(nt)

    maxb = 0
    blist: list[list[float]] = []
    if breaks is not None:
        for tv in t:
            bl = [b for b in breaks(float(tv)) if 1e-14 < b < domain.radius]
            blist.append(sorted(bl))
            maxb = max(maxb, len(bl))
    cols = []
    if maxb:
        B = np.empty((nt, maxb))
        for i, bl in enumerate(blist):
            row = list(bl) + [domain.radius] * (maxb - len(bl))
            B[i] = row
        cols.append(B)
    for cc, R in circles or []:
        # euclidean crossing radius sigma maps to q-radius s = sigma * kappa
        cols.append(_ray_circle_crossings(t, cc, R) * kap[:, None])
    B = np.concatenate(cols, axis=1) if cols else np.empty((nt, 0))

    center = np.zeros(2)
    converged = True
    total = 0.0
    if singular_center and hole_eps == 0.0:
        inner = np.minimum(s_hi, np.min(B, axis=1) if maxb else s_hi) * 0.5
        val, ok = _dyadic_sum(f, center, u, jac_t, wt, inner, ng, abs_tol)
        total += val
        converged &= ok
        s_lo = inner
    bounds = np.concatenate([s_lo[:, None], np.clip(B, s_lo[:, None], s_hi[:, None]),
                             s_hi[:, None]], axis=1)
    bounds = np.sort(bounds, axis=1)
    total += _segment_sum(f, center, u, jac_t, wt, bounds, nsub, ng)
    return total, converged


def integrate_annulus(f, center, r_in, r_out, *, breaks=None, circles=None,
                      nt=512, nsub=4, ng=8, singular=False, abs_tol=1e-12):
    """Polar quadrature of f over the annulus (or punctured disk when
    singular) centered at `center`."""
    t = (np.arange(nt) + 0.5) * (TWO_PI / nt)
    wt = TWO_PI / nt
    u = np.stack([np.cos(t), np.sin(t)], axis=-1)
    jac_t = np.ones(nt)
    c = np.asarray(center, dtype=float)
    converged = True
    total = 0.0
    lo = np.full(nt, r_in)
    cols_b = []
    if breaks is not None:
        blist = []
        maxb = 0
        for tv in t:
            bl = [b for b in breaks(float(tv)) if r_in + 1e-14 < b < r_out - 1e-14]
            blist.append(sorted(bl))
            maxb = max(maxb, len(bl))
        if maxb:
            B = np.empty((nt, maxb))
            for i, bl in enumerate(blist):
                B[i] = list(bl) + [r_out] * (maxb - len(bl))
            cols_b.append(B)
    for cc, R in circles or []:
        cols_b.append(_ray_circle_crossings(t, cc, R, origin=c))
    if singular and r_in == 0.0:
        inner = np.full(nt, r_out / 2.0)
        val, ok = _dyadic_sum(f, c, u, jac_t, wt, inner, ng, abs_tol)
        total += val
        converged &= ok
        lo = inner
    cols = [lo[:, None]]
    for B in cols_b:
        cols.append(np.clip(B, lo[:, None], r_out))
    cols.append(np.full((nt, 1), r_out))
    bounds = np.sort(np.concatenate(cols, axis=1), axis=1)
    total += _segment_sum(f, c, u, jac_t, wt, bounds, nsub, ng)
    return total, converged


def _smooth_blend(r, r_in, r_out):
    """1 at r <= r_in, 0 at r >= r_out, cubic smoothstep between."""
    u = np.clip((r - r_in) / (r_out - r_in), 0.0, 1.0)
    return 1.0 - (3.0 * u * u - 2.0 * u**3)


def _patch_radius(a, domain: Domain, others, eps):
    cap = float(domain.dist_to_boundary(a)) * 0.9
    for b in others:
        d = float(np.linalg.norm(np.asarray(a) - np.asarray(b)))
        if d > 0:
            cap = min(cap, 0.45 * d)
    return max(cap, 1.5 * eps) if cap > 1.2 * eps else 1.2 * eps


def _integrate_perforated(f, domain: Domain, cfg: FlawConfig | None,
                          y: Deformation, *, singular=False, nt=512, nsub=4,
                          ng=8, abs_tol=1e-12, circles=None):
    """Integrate f over the perforated (or punctured, when singular) domain.

    Fast path: a single flaw at the domain center uses exact radial hole
    geometry. Otherwise a smooth partition of unity splits the integral into
    per-flaw polar patches plus a background with the patches blended out.
    `circles` lists (center, radius) pairs along which the integrand has
    reduced smoothness; rays are split there.
    """
    breaks = None
    if y.radial_breaks is not None:
        breaks = lambda t: y.radial_breaks(np.zeros(2), t)

    if cfg is None or len(cfg) == 0:
        sing = singular and len(y.singular_points) > 0 and np.allclose(
            y.singular_points[0], 0.0)
        return integrate_q_ball(f, domain, singular_center=sing, breaks=breaks,
                                circles=circles, nt=nt, nsub=nsub, ng=ng,
                                abs_tol=abs_tol)

    pts = cfg.points
    eps = 0.0 if singular else cfg.eps
    if len(pts) == 1 and np.allclose(pts[0], 0.0):
        return integrate_q_ball(f, domain, hole_eps=eps,
                                singular_center=singular, breaks=breaks,
                                circles=circles, nt=nt, nsub=nsub, ng=ng,
                                abs_tol=abs_tol)

    radii = {i: _patch_radius(pts[i], domain, np.delete(pts, i, axis=0), cfg.eps)
             for i in range(len(pts))}

    def background(X):
        w = np.ones(X.shape[:-1])
        hole = np.zeros(X.shape[:-1], dtype=bool)
        for i, a in enumerate(pts):
            r = np.linalg.norm(X - a, axis=-1)
            w = w * (1.0 - _smooth_blend(r, cfg.eps, radii[i]))
            hole |= r <= (cfg.eps if not singular else radii[i] * 0.0)
        out = np.zeros(X.shape[:-1])
        live = (w > 1e-14) & ~hole
        if np.any(live):
            out[live] = f(X[live]) * w[live]
        return out

    patch_circles = [(pts[i], radii[i]) for i in range(len(pts))]
    patch_circles += [(pts[i], cfg.eps) for i in range(len(pts))]
    total, conv = integrate_q_ball(background, domain,
                                   circles=patch_circles + (circles or []),
                                   nt=nt, nsub=nsub, ng=ng, abs_tol=abs_tol)
    for i, a in enumerate(pts):
        def patch(X, a=a, i=i):
            r = np.linalg.norm(X - a, axis=-1)
            return f(X) * _smooth_blend(r, cfg.eps, radii[i])

        pb = None
        if y.radial_breaks is not None:
            pb = lambda t, a=a: y.radial_breaks(np.asarray(a, dtype=float), t)
        val, ok = integrate_annulus(patch, a, eps, radii[i], breaks=pb,
                                    circles=circles, nt=nt, nsub=nsub, ng=ng,
                                    singular=singular, abs_tol=abs_tol)
        total += val
        conv = conv and ok
    return total, conv


def _refine(pass_fn, tol, max_refine, nt0=256, nsub0=2):
    """Grid-doubling refinement; the dominant error is O(h^2) from angular
    kinks, so the error of the fine pass is estimated as a third of the last
    successive difference."""
    nt, nsub = nt0, nsub0
    prev, conv = pass_fn(nt, nsub)
    for _ in range(max_refine):
        nt *= 2
        nsub *= 2
        cur, ok = pass_fn(nt, nsub)
        conv = conv and ok
        if abs(cur - prev) / 3.0 <= tol * max(abs(cur), 1e-30):
            return cur, True and conv
        prev = cur
    return prev, False


# --------------------------------------------------------------------------
# energy operations


def elastic_energy(y: Deformation, dom: Domain, density: Density, *,
                   tol: float = 1e-6, max_refine: int = 4,
                   strict: bool = True):
    """Bulk stored energy over the (possibly perforated) domain, refined until
    successive quadrature passes agree to `tol` relative.

    With strict=False returns (value, converged) instead of raising on
    non-convergence; maps with degenerate rays can have genuinely divergent
    bulk energy, which shows up as a non-converging refinement."""

    def f(X):
        return density.w(y.grad(X))

    def one_pass(nt, nsub):
        return _integrate_perforated(f, dom, dom.flaws, y, nt=nt, nsub=nsub)

    val, ok = _refine(one_pass, tol, max_refine)
    if not strict:
        return val, ok
    if not ok:
        raise QuadratureError("elastic energy quadrature did not converge")
    return val


def _flaw_metrics(y, a, eps, trace_tol=1e-9):
    m = converged_trace_metrics(y, a, eps, tol=trace_tol)
    return m


def regularized_energy(y: Deformation, cfg: FlawConfig, dom: Domain,
                       density: Density, lambdas, *, tol: float = 1e-6,
                       max_refine: int = 4, strict: bool = True):
    """Core-radius energy: bulk term over the perforated domain plus weighted
    volume and perimeter of each perforation trace.

    With strict=False returns (breakdown, elastic_converged)."""
    report = validate_flaw_config(cfg, dom)
    if not report.ok:
        raise ValueError(f"invalid flaw configuration: {report}")
    dom_p = Domain(q=dom.q, radius=dom.radius, flaws=cfg)
    el, el_ok = elastic_energy(y, dom_p, density, tol=tol,
                               max_refine=max_refine, strict=False)
    if strict and not el_ok:
        raise QuadratureError("elastic energy quadrature did not converge")
    vol = per = 0.0
    for a in cfg.points:
        m = _flaw_metrics(y, a, cfg.eps)
        vol += m.volume
        per += m.perimeter
    bd = EnergyBreakdown.assemble(el, vol, per, lambdas)
    return bd if strict else (bd, el_ok)


@dataclass(frozen=True)
class FlawLimit:
    center: tuple[float, float]
    volume: float
    volume_unc: float
    perimeter: float
    perimeter_unc: float
    volume_series: tuple
    perimeter_series: tuple
    perimeter_reduced_boundary: float | None
    conv_perimeter_ok: bool | None
    has_cavity: bool


@dataclass(frozen=True)
class LimitEnergyReport:
    breakdown: EnergyBreakdown
    flaws: tuple[FlawLimit, ...]
    elastic_converged: bool
    flags: tuple[str, ...]

    @property
    def conv_perimeter_violated(self) -> bool:
        return any(f.conv_perimeter_ok is False for f in self.flaws)


CAVITY_THRESHOLD = 1e-6  # extrapolated volume below this counts as "no cavity"
CONV_PERIMETER_TOL = 5e-2


def limit_energy(y: Deformation, points, dom: Domain, density: Density,
                 lambdas, r_grid, *, tol: float = 1e-6, max_refine: int = 4,
                 extrap_unc_tol: float = 0.05) -> LimitEnergyReport:
    """Vanishing-core energy: bulk term over the full domain (graded toward
    each flaw point) plus extrapolated cavity volumes/perimeters.

    When the deformation carries an exact reduced-boundary perimeter for its
    cavity, the extrapolated value is compared against it and disagreement is
    flagged (the perimeter term of the vanishing-core limit can exceed the
    perimeter of the limiting cavity)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    r_grid = np.asarray(r_grid, dtype=float)
    flags: list[str] = []

    cfg = FlawConfig(points=pts, eps=float(r_grid[0]), max_count=max(len(pts), 1))

    def f(X):
        return density.w(y.grad(X))

    def one_pass(nt, nsub):
        return _integrate_perforated(f, dom, cfg if len(pts) else None, y,
                                     singular=True, nt=nt, nsub=nsub)

    el, el_ok = _refine(one_pass, tol, max_refine)
    if not el_ok:
        flags.append("elastic-not-converged")

    flaw_rows = []
    vol_sum = per_sum = 0.0
    for a in pts:
        vols, pers = [], []
        for r in r_grid:
            m = _flaw_metrics(y, a, float(r))
            vols.append(m.volume)
            pers.append(m.perimeter)
        v0, vu = extrapolate_limit(r_grid, vols)
        p0, pu = extrapolate_limit(r_grid, pers)
        if max(vu, pu) > extrap_unc_tol:
            flags.append(f"extrapolation-uncertain at {tuple(a)}")
        exact_per = None
        conv_ok = None
        if y.cavity_exact is not None and np.allclose(a, 0.0):
            exact_per = float(y.cavity_exact["perimeter"])
            conv_ok = abs(p0 - exact_per) <= CONV_PERIMETER_TOL * max(exact_per, 1.0)
            if not conv_ok:
                flags.append("conv-perimeter-violated")
        has_cavity = v0 > CAVITY_THRESHOLD
        flaw_rows.append(FlawLimit(
            center=(float(a[0]), float(a[1])), volume=v0, volume_unc=vu,
            perimeter=p0, perimeter_unc=pu,
            volume_series=tuple(vols), perimeter_series=tuple(pers),
            perimeter_reduced_boundary=exact_per, conv_perimeter_ok=conv_ok,
            has_cavity=has_cavity))
        vol_sum += v0
        per_sum += p0
    bd = EnergyBreakdown.assemble(el, vol_sum, per_sum, lambdas)
    return LimitEnergyReport(breakdown=bd, flaws=tuple(flaw_rows),
                             elastic_converged=el_ok, flags=tuple(flags))


# --------------------------------------------------------------------------
# test functions and the perforation-aware determinant pairing


@dataclass(frozen=True)
class TestFunction:
    """Polynomial bump (1 - |x-c|^2/R^2)^k, zero-extended outside its disk."""

    k: int
    radius: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        d = x - np.asarray(self.center)
        u = 1.0 - np.sum(d * d, axis=-1) / self.radius**2
        return np.where(u > 0, u, 0.0) ** self.k

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        d = x - np.asarray(self.center)
        u = 1.0 - np.sum(d * d, axis=-1) / self.radius**2
        coef = np.where(u > 0, self.k * np.where(u > 0, u, 0.0) ** (self.k - 1), 0.0)
        return (-2.0 / self.radius**2) * coef[..., None] * d


def bump(k: int, radius: float = 1.0, center=(0.0, 0.0)) -> TestFunction:
    return TestFunction(k=k, radius=radius, center=tuple(center))


@dataclass(frozen=True)
class DetPairingResult:
    pairing: float
    bulk_term: float
    sphere_term: float
    det_integral: float

    @property
    def residual_rel(self) -> float:
        return abs(self.pairing - self.det_integral) / max(abs(self.det_integral), 1e-30)


def extended_det_pairing(y: Deformation, cfg: FlawConfig, dom: Domain,
                         phi: TestFunction, *, tol: float = 1e-6,
                         max_refine: int = 4, trace_n: int = 4096) -> DetPairingResult:
    """Pair the divergence-form determinant of y (with perforation-sphere
    corrections) against a test function, alongside the plain bulk integral
    of det(grad y) phi for comparison."""

    def f_bulk(X):
        G = y.grad(X)
        ay = np.einsum("...ij,...j->...i", adj2(G), y.eval(X))
        return -0.5 * np.einsum("...i,...i->...", ay, phi.grad(X))

    def f_det(X):
        return det2(y.grad(X)) * phi.eval(X)

    supp = [(np.asarray(phi.center, dtype=float), phi.radius)]

    def pass_bulk(nt, nsub):
        return _integrate_perforated(f_bulk, dom, cfg, y, nt=nt, nsub=nsub,
                                     circles=supp)

    def pass_det(nt, nsub):
        return _integrate_perforated(f_det, dom, cfg, y, nt=nt, nsub=nsub,
                                     circles=supp)

    bulk, ok1 = _refine(pass_bulk, tol, max_refine)
    deti, ok2 = _refine(pass_det, tol, max_refine)
    if not (ok1 and ok2):
        raise QuadratureError("determinant pairing quadrature did not converge")

    sphere = 0.0
    for a in cfg.points:
        curve = trace_on_circle(y, a, cfg.eps, trace_n)
        w, dw = curve.points, curve.derivs
        pv = phi.eval(_circle_pts(a, cfg.eps, curve.ts))
        integrand = 0.5 * (w[:, 0] * dw[:, 1] - w[:, 1] * dw[:, 0]) * pv
        sphere -= curve.integrate(integrand)
    return DetPairingResult(pairing=bulk + sphere, bulk_term=bulk,
                            sphere_term=sphere, det_integral=deti)


def _circle_pts(a, eps, ts):
    return np.asarray(a, dtype=float) + eps * np.stack(
        [np.cos(ts), np.sin(ts)], axis=-1)


# --------------------------------------------------------------------------
# sampled admissibility checks


@dataclass(frozen=True)
class CheckRow:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class AdmissibilityReport:
    rows: tuple[CheckRow, ...]
    ok: bool

    def __str__(self):
        return "\n".join(
            f"[{'pass' if r.passed else 'FAIL'}] {r.name}: {r.detail}" for r in self.rows
        )


def _sample_perforated(dom: Domain, rng, n):
    R = dom.radius
    out = np.empty((0, 2))
    while len(out) < n:
        cand = rng.uniform(-R, R, size=(4 * n, 2))
        cand = cand[dom.contains_perforated(cand)]
        out = np.vstack([out, cand])
    return out[:n]


def check_admissibility_sampled(
    y: Deformation,
    cfg: FlawConfig,
    dom: Domain,
    radii,
    *,
    grid: int = 100,
    n_bulk: int = 2000,
    n_membership: int = 200,
    seed: int = 0,
    det_tol: float = 1e-4,
) -> AdmissibilityReport:
    """Sampled surrogate of the admissibility requirements for core-radius
    deformations. Returns a report and never raises."""
    rng = np.random.default_rng(seed)
    rows: list[CheckRow] = []
    dom_p = Domain(q=dom.q, radius=dom.radius, flaws=cfg)

    # orientation: det grad > 0 on the perforated domain
    try:
        pts = _sample_perforated(dom_p, rng, n_bulk)
        dets = det2(y.grad(pts))
        bad = int(np.sum(dets <= 0))
        rows.append(CheckRow("orientation", bad == 0,
                             f"{bad}/{n_bulk} sampled points with det <= 0"))
    except Exception as e:  # report, never raise
        rows.append(CheckRow("orientation", False, f"check errored: {e}"))

    # circles used for degree/membership checks
    circles = [(a, float(r)) for a in cfg.points for r in radii]
    for _ in range(3):
        c = _sample_perforated(dom_p, rng, 1)[0]
        rho = 0.25 * float(dom.dist_to_boundary(c))
        far = all(np.linalg.norm(c - a) > rho + cfg.eps + 1e-3 for a in cfg.points)
        if rho > 2 * cfg.eps and far:
            circles.append((c, rho))

    deg_ok, deg_detail = True, []
    mem_ok, mem_detail = True, []
    for center, rho in circles:
        try:
            curve = trace_on_circle(y, center, rho, 512)
        except Exception as e:
            deg_ok = False
            deg_detail.append(f"trace at {tuple(np.round(center, 3))},r={rho:.3g}: {e}")
            continue
        degs = degree_range_on_grid(curve, grid, grid)
        if not degs <= {0, 1}:
            deg_ok = False
            deg_detail.append(
                f"degrees {sorted(degs)} at {tuple(np.round(center, 3))}, r={rho:.3g}")
        # membership: inside test circle -> image inside trace; outside -> outside
        samples = _sample_perforated(dom_p, rng, n_membership)
        d = np.linalg.norm(samples - center, axis=-1)
        img = y.eval(samples)
        for i in range(len(samples)):
            loc = topological_image_contains(curve, img[i])
            if loc == NEAR_BOUNDARY:
                continue
            want = INSIDE if d[i] < rho - 1e-9 else OUTSIDE
            if d[i] >= rho - 1e-9 and d[i] <= rho + 1e-9:
                continue
            if loc != want:
                mem_ok = False
                mem_detail.append(
                    f"point {tuple(np.round(samples[i], 3))} maps {loc}, expected {want} "
                    f"(circle {tuple(np.round(center, 3))}, r={rho:.3g})")
    rows.append(CheckRow("degree-range", deg_ok,
                         "all degrees in {0,1}" if deg_ok else "; ".join(deg_detail[:4])))
    rows.append(CheckRow("interior-exterior", mem_ok,
                         "membership consistent" if mem_ok else "; ".join(mem_detail[:4])))

    # trace near-injectivity on the perforation spheres
    inj_ok, inj_detail = True, []
    for a in cfg.points:
        try:
            curve = trace_on_circle(y, a, cfg.eps, 512)
        except Exception as e:
            inj_ok = False
            inj_detail.append(str(e))
            continue
        pts = curve.points
        n = len(pts)
        thresh = 1e-6 * curve.diameter
        idx = np.arange(n)
        sep = np.minimum(np.abs(idx[:, None] - idx[None, :]),
                         n - np.abs(idx[:, None] - idx[None, :]))
        dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
        mask = sep > 4
        mind = float(np.min(dist[mask])) if np.any(mask) else np.inf
        if mind <= thresh:
            inj_ok = False
            inj_detail.append(f"closest distinct-parameter pair {mind:.3g} at "
                              f"{tuple(np.round(a, 3))}")
    rows.append(CheckRow("trace-injectivity", inj_ok,
                         "separated" if inj_ok else "; ".join(inj_detail)))

    # determinant identity on the perforated domain
    det_ok, det_detail = True, []
    try:
        for k in (2, 3, 4):
            phi = bump(k, radius=0.95 * _inradius(dom))
            res = extended_det_pairing(y, cfg, dom, phi, tol=1e-5)
            if res.residual_rel > det_tol:
                det_ok = False
            det_detail.append(f"k={k}: rel residual {res.residual_rel:.2e}")
    except Exception as e:
        det_ok = False
        det_detail.append(f"check errored: {e}")
    rows.append(CheckRow("det-identity", det_ok, "; ".join(det_detail)))

    return AdmissibilityReport(rows=tuple(rows), ok=all(r.passed for r in rows))


def _inradius(dom: Domain) -> float:
    if dom.q == 1:
        return dom.radius / math.sqrt(2.0)
    return dom.radius
