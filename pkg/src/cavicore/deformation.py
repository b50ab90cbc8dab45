"""Deformation contract (value + exact gradient) and the analytic map catalog.

Every map is vectorized: eval takes (..., 2) arrays and returns (..., 2);
grad returns (..., 2, 2). Piecewise formulas evaluate the branch containing
the point, with ties resolved toward the first printed branch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .geometry import Domain

SQRT3 = math.sqrt(3.0)
_I2 = np.eye(2)


class EvaluationDomainError(ValueError):
    """Raised when a composition is evaluated outside the outer map's domain."""


class NonmonotoneProfileError(ValueError):
    """Raised when a radial profile is not strictly increasing."""


def _sign(x):
    """Sign with the tie 0 -> +1, so seams take the first branch."""
    return np.where(np.asarray(x) >= 0.0, 1.0, -1.0)


@dataclass
class Deformation:
    """An evaluable planar map with exact gradient.

    `trace_kinks(center, eps)` optionally returns parameter angles where the
    trace of the map on the circle S(center, eps) has derivative jumps;
    `radial_breaks(center, t)` optionally returns radii where the gradient
    jumps along the ray from `center` with direction angle `t`. Both are
    quadrature hints only.
    """

    eval: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]
    domain: Domain | None = None
    singular_points: np.ndarray = field(
        default_factory=lambda: np.zeros((0, 2))
    )
    grad_mode: str = "analytic"
    name: str = ""
    trace_kinks: Callable[[np.ndarray, float], list[float]] | None = None
    radial_breaks: Callable[[np.ndarray, float], list[float]] | None = None
    cavity_exact: dict | None = None  # {"volume": v, "perimeter": p} of the limit cavity
    metadata: dict = field(default_factory=dict)

    def __call__(self, x):
        return self.eval(x)


def finite_difference_grad(f, x, h: float = 1e-5):
    """Central finite differences of a vectorized planar map."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (2,))
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        out[..., :, j] = (f(x + e) - f(x - e)) / (2.0 * h)
    return out


def deformation_from_eval(f, domain=None, name="", singular_points=None, h=1e-5):
    """Wrap a value-only map; the gradient falls back to finite differences."""
    return Deformation(
        eval=f,
        grad=lambda x: finite_difference_grad(f, x, h),
        domain=domain,
        singular_points=np.zeros((0, 2)) if singular_points is None else np.atleast_2d(singular_points),
        grad_mode="finite-difference",
        name=name,
    )


def identity_deformation(domain=None) -> Deformation:
    return Deformation(
        eval=lambda x: np.asarray(x, dtype=float).copy(),
        grad=lambda x: np.broadcast_to(_I2, np.shape(x)[:-1] + (2, 2)).copy(),
        domain=domain,
        name="identity",
    )


def affine_deformation(F, domain=None) -> Deformation:
    F = np.asarray(F, dtype=float)
    return Deformation(
        eval=lambda x: np.asarray(x, dtype=float) @ F.T,
        grad=lambda x: np.broadcast_to(F, np.shape(x)[:-1] + (2, 2)).copy(),
        domain=domain,
        name="affine",
    )


# --------------------------------------------------------------------------
# catalog example 1: cavity shaped like a 1-norm ball


def example_radial(b: float) -> Deformation:
    """Map opening a square (1-norm ball) cavity of radius b at the origin of
    the unit 1-norm ball: x -> ((1-b)|x|_1 + b) x / |x|_1."""
    if not 0.0 < b < 1.0:
        raise ValueError("b must lie in (0, 1)")

    def ev(x):
        x = np.asarray(x, dtype=float)
        n1 = np.abs(x[..., :1]) + np.abs(x[..., 1:])
        return ((1.0 - b) * n1 + b) * x / n1

    def gr(x):
        x = np.asarray(x, dtype=float)
        n1 = np.abs(x[..., 0]) + np.abs(x[..., 1])
        s = _sign(x)
        M = _I2 - x[..., :, None] * s[..., None, :] / n1[..., None, None]
        return (1.0 - b) * _I2 + (b / n1)[..., None, None] * M

    return Deformation(
        eval=ev,
        grad=gr,
        domain=Domain(q=1, radius=1.0),
        singular_points=np.array([[0.0, 0.0]]),
        name="radial",
        cavity_exact={"volume": 2.0 * b * b, "perimeter": 4.0 * math.sqrt(2.0) * b},
        metadata={"b": b, "p_range": (1.0, 2.0)},
    )


# --------------------------------------------------------------------------
# catalog example 2: stretched reference configuration, round cavity


def _euclid_cavity_map(b: float):
    """z -> ((1-b)|z| + b) z/|z| for 0 < |z| < 1, identity for |z| >= 1."""

    def ev(z):
        z = np.asarray(z, dtype=float)
        n = np.sqrt(np.sum(z * z, axis=-1, keepdims=True))
        ns = np.where(n > 0, n, 1.0)
        rad = ((1.0 - b) * ns + b) * z / ns
        return np.where(n < 1.0, rad, z)

    def gr(z):
        z = np.asarray(z, dtype=float)
        n = np.sqrt(np.sum(z * z, axis=-1))
        ns = np.where(n > 0, n, 1.0)
        e = z / ns[..., None]
        ee = e[..., :, None] * e[..., None, :]
        gofn = (1.0 - b) + b / ns
        inner = gofn[..., None, None] * (_I2 - ee) + (1.0 - b) * ee
        return np.where((n < 1.0)[..., None, None], inner, _I2)

    return ev, gr


def example_change_of_reference(b: float) -> Deformation:
    """Round cavity opened after stretching the right half of the square
    reference configuration: y = u o f with f = (2 x1, x2) for x1 >= 0."""
    if not 0.0 < b < 1.0:
        raise ValueError("b must lie in (0, 1)")
    uev, ugr = _euclid_cavity_map(b)

    def fev(x):
        x = np.asarray(x, dtype=float)
        out = x.copy()
        out[..., 0] = np.where(x[..., 0] >= 0.0, 2.0 * x[..., 0], x[..., 0])
        return out

    def fgr(x):
        x = np.asarray(x, dtype=float)
        out = np.broadcast_to(_I2, x.shape[:-1] + (2, 2)).copy()
        out[..., 0, 0] = np.where(x[..., 0] >= 0.0, 2.0, 1.0)
        return out

    def ev(x):
        return uev(fev(x))

    def gr(x):
        return ugr(fev(x)) @ fgr(x)

    return Deformation(
        eval=ev,
        grad=gr,
        domain=Domain(q=np.inf, radius=1.0),
        singular_points=np.array([[0.0, 0.0]]),
        name="change-of-reference",
        cavity_exact={"volume": math.pi * b * b, "perimeter": 2.0 * math.pi * b},
        metadata={"b": b, "p_range": (1.0, 2.0)},
    )


def change_of_reference_parts(b: float) -> tuple[Deformation, Deformation]:
    """The (outer, inner) factors of the change-of-reference map, for
    composition tests."""
    uev, ugr = _euclid_cavity_map(b)
    outer = Deformation(eval=uev, grad=ugr, name="round-cavity")

    def fev(x):
        x = np.asarray(x, dtype=float)
        out = x.copy()
        out[..., 0] = np.where(x[..., 0] >= 0.0, 2.0 * x[..., 0], x[..., 0])
        return out

    def fgr(x):
        x = np.asarray(x, dtype=float)
        out = np.broadcast_to(_I2, x.shape[:-1] + (2, 2)).copy()
        out[..., 0, 0] = np.where(x[..., 0] >= 0.0, 2.0, 1.0)
        return out

    inner = Deformation(eval=fev, grad=fgr, domain=Domain(q=np.inf, radius=1.0),
                        name="half-stretch")
    return outer, inner


# --------------------------------------------------------------------------
# catalog example 3: superposition with a piecewise-smooth squeeze


def _superposition_g():
    def ev(z):
        z = np.asarray(z, dtype=float)
        z1, z2 = z[..., 0], z[..., 1]
        a1, a2 = np.abs(z1), np.abs(z2)
        b1 = (a1 > a2) & (a2 < 0.5)
        b2 = (a2 > a1) & (a1 < 0.5)
        out = z.copy()
        out[..., 0] = np.where(b1, _sign(z1) * (1.0 - 2.0 * a2) + 2.0 * z1 * a2, z1)
        out[..., 1] = np.where(b2, _sign(z2) * (1.0 - 2.0 * a1) + 2.0 * a1 * z2, z2)
        return out

    def gr(z):
        z = np.asarray(z, dtype=float)
        z1, z2 = z[..., 0], z[..., 1]
        a1, a2 = np.abs(z1), np.abs(z2)
        b1 = (a1 > a2) & (a2 < 0.5)
        b2 = (a2 > a1) & (a1 < 0.5)
        out = np.broadcast_to(_I2, z.shape[:-1] + (2, 2)).copy()
        out[..., 0, 0] = np.where(b1, 2.0 * a2, 1.0)
        out[..., 0, 1] = np.where(b1, 2.0 * _sign(z2) * (z1 - _sign(z1)), 0.0)
        out[..., 1, 0] = np.where(b2, 2.0 * _sign(z1) * (z2 - _sign(z2)), 0.0)
        out[..., 1, 1] = np.where(b2, 2.0 * a1, 1.0)
        return out

    return ev, gr


def _supnorm_annulus_map():
    """x -> (|x|_inf + 1)/2 * x/|x|_inf, mapping the punctured sup-ball onto
    the annulus 1/2 < |z|_inf < 1."""

    def ev(x):
        x = np.asarray(x, dtype=float)
        m = np.max(np.abs(x), axis=-1, keepdims=True)
        return 0.5 * (m + 1.0) * x / m

    def gr(x):
        x = np.asarray(x, dtype=float)
        a = np.abs(x)
        m = np.max(a, axis=-1)
        k = np.argmax(a, axis=-1)
        v = np.zeros(x.shape)
        idx = np.indices(k.shape, sparse=False)
        v[(*idx, k)] = _sign(np.take_along_axis(x, k[..., None], axis=-1))[..., 0]
        M = _I2 / m[..., None, None] - x[..., :, None] * v[..., None, :] / (m**2)[..., None, None]
        return 0.5 * _I2 + 0.5 * M

    return ev, gr


def example_superposition() -> Deformation:
    """Square-annulus cavity map composed with the piecewise squeeze that
    flattens the annulus sides onto the unit diamond."""
    uev, ugr = _supnorm_annulus_map()
    gev, ggr = _superposition_g()

    def ev(x):
        return gev(uev(x))

    def gr(x):
        return ggr(uev(x)) @ ugr(x)

    def kinks(center, eps):
        # trace derivative jumps where the annulus image crosses |z_i| = 1/2,
        # i.e. where r sin(t) + tan(t) = 1 in the first octant
        r = float(eps)
        f = lambda t: r * math.sin(t) + math.tan(t) - 1.0
        if f(1e-12) >= 0 or f(math.pi / 4) <= 0:
            return []
        th = brentq(f, 1e-12, math.pi / 4)
        base = [th, math.pi / 2 - th]
        return sorted(
            (a + k * math.pi / 2) % (2 * math.pi) for a in base for k in range(4)
        )

    def rbreaks(center, t):
        # gradient of g o u jumps where |z_2| = 1/2 (resp. |z_1| = 1/2);
        # along the ray with direction angle t this happens at one radius
        c, s = abs(math.cos(t)), abs(math.sin(t))
        hi, lo = max(c, s), min(c, s)
        if lo < 1e-14:
            return []
        # |z_minor| = (m+1)/2 * lo/hi = 1/2 at m = lo/(hi - lo)
        if hi - lo < 1e-14:
            return []
        m = lo / (hi - lo)
        return [m] if 0.0 < m < 1.0 else []

    return Deformation(
        eval=ev,
        grad=gr,
        domain=Domain(q=np.inf, radius=1.0),
        singular_points=np.array([[0.0, 0.0]]),
        name="superposition",
        trace_kinks=kinks,
        radial_breaks=rbreaks,
        cavity_exact={"volume": 2.0, "perimeter": 8.0 / math.sqrt(2.0)},
        metadata={"p_range": (1.0, 2.0)},
    )


# --------------------------------------------------------------------------
# catalog example 4: round cavity with a collapsed spike


_SPIKE_ALPHA = 4.0 * (5.0 - 2.0 * SQRT3)


def _spike_coef(R):
    """Slope of the segment the circle |z| = R is flattened onto inside the
    wedge region, written to avoid cancellation near R = 1/2."""
    R = np.asarray(R, dtype=float)
    q = np.sqrt(np.maximum(_SPIKE_ALPHA * R * R - 1.0, 0.0))
    denom = _SPIKE_ALPHA * (R * R - 0.25) / (q + SQRT3 - 1.0)
    return (-9.0 + 4.0 * SQRT3 + (SQRT3 - 1.0) * q) / denom


def _spike_coef_deriv(R):
    R = np.asarray(R, dtype=float)
    q = np.sqrt(np.maximum(_SPIKE_ALPHA * R * R - 1.0, 1e-300))
    denom = _SPIKE_ALPHA * (R * R - 0.25) / (q + SQRT3 - 1.0)
    dc_dq = (5.0 - 2.0 * SQRT3) / denom**2
    return dc_dq * _SPIKE_ALPHA * R / q


def example_spike() -> Deformation:
    """Round cavity whose boundary develops an exterior spike: the wedge above
    the chord is squeezed onto segments ending at (0, 1)."""

    def in_wedge(z):
        z1, z2 = z[..., 0], z[..., 1]
        return z2 > (SQRT3 - 1.0) * np.abs(z1) + 0.5

    def ev(x):
        x = np.asarray(x, dtype=float)
        n = np.sqrt(np.sum(x * x, axis=-1, keepdims=True))
        z = 0.5 * (n + 1.0) * x / n
        w = in_wedge(z)
        R = np.sqrt(np.sum(z * z, axis=-1))
        c = np.where(w, _spike_coef(np.where(w, R, 1.0)), 0.0)
        out = z.copy()
        out[..., 1] = np.where(w, c * np.abs(z[..., 0]) + 1.0, z[..., 1])
        return out

    def gr(x):
        x = np.asarray(x, dtype=float)
        n = np.sqrt(np.sum(x * x, axis=-1))
        e = x / n[..., None]
        ee = e[..., :, None] * e[..., None, :]
        h_over = 0.5 * (n + 1.0) / n
        Du = h_over[..., None, None] * (_I2 - ee) + 0.5 * ee
        z = 0.5 * (n + 1.0)[..., None] * e
        z1, z2 = z[..., 0], z[..., 1]
        w = in_wedge(z)
        R = np.sqrt(np.sum(z * z, axis=-1))
        Rsafe = np.where(w, R, 1.0)
        c = _spike_coef(Rsafe)
        cp = _spike_coef_deriv(Rsafe)
        Dg = np.broadcast_to(_I2, z.shape[:-1] + (2, 2)).copy()
        Dg[..., 1, 0] = np.where(w, cp * z1 / R * np.abs(z1) + c * _sign(z1), 0.0)
        Dg[..., 1, 1] = np.where(w, cp * z2 / R * np.abs(z1), 1.0)
        return Dg @ Du

    def kinks(center, eps):
        R = 0.5 * (1.0 + float(eps))
        f = lambda t: R * math.sin(t) - (SQRT3 - 1.0) * R * abs(math.cos(t)) - 0.5
        if f(math.pi / 2) <= 0:
            return []
        t_hi = brentq(f, 1e-12, math.pi / 2)
        return [t_hi, math.pi - t_hi]

    def rbreaks(center, t):
        denom = math.sin(t) - (SQRT3 - 1.0) * abs(math.cos(t))
        if denom <= 0:
            return []
        Rstar = 0.5 / denom
        s = 2.0 * Rstar - 1.0
        return [s] if 0.0 < s < 1.0 else []

    return Deformation(
        eval=ev,
        grad=gr,
        domain=Domain(q=2, radius=1.0),
        singular_points=np.array([[0.0, 0.0]]),
        name="spike",
        trace_kinks=kinks,
        radial_breaks=rbreaks,
        cavity_exact={"volume": math.pi / 4.0, "perimeter": math.pi},
        metadata={"p_range": (1.0, 2.0), "conv_perimeter_violated": True},
    )


# --------------------------------------------------------------------------
# discrete radial profiles and their lifted deformations


@dataclass(frozen=True)
class RadialProfile:
    """Piecewise-linear strictly increasing radial stretch rho on [nodes[0],
    nodes[-1]]."""

    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)
        if nodes.ndim != 1 or nodes.shape != values.shape or len(nodes) < 2:
            raise ValueError("profile needs matching 1-d nodes/values, length >= 2")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("profile nodes must be strictly increasing")
        if np.any(np.diff(values) <= 0):
            raise NonmonotoneProfileError("profile values must be strictly increasing")
        if values[0] <= 0:
            raise ValueError("profile values must be positive")

    def __call__(self, r):
        return np.interp(r, self.nodes, self.values)

    def slope(self, r):
        """Piecewise-constant derivative; node points take the right segment."""
        r = np.asarray(r, dtype=float)
        seg = np.clip(np.searchsorted(self.nodes, r, side="right") - 1, 0,
                      len(self.nodes) - 2)
        s = np.diff(self.values) / np.diff(self.nodes)
        return s[seg]

    @property
    def inner_radius(self):
        return float(self.nodes[0])

    @property
    def cavity_radius(self):
        return float(self.values[0])


def radial_deformation(profile: RadialProfile, center=(0.0, 0.0)) -> Deformation:
    """Lift a radial profile to the planar map
    x -> a + rho(|x - a|) (x - a)/|x - a|."""
    a = np.asarray(center, dtype=float)

    def ev(x):
        x = np.asarray(x, dtype=float)
        d = x - a
        r = np.sqrt(np.sum(d * d, axis=-1, keepdims=True))
        return a + profile(r[..., 0])[..., None] * d / r

    def gr(x):
        x = np.asarray(x, dtype=float)
        d = x - a
        r = np.sqrt(np.sum(d * d, axis=-1))
        e = d / r[..., None]
        ee = e[..., :, None] * e[..., None, :]
        rho = profile(r)
        rhop = profile.slope(r)
        return (rho / r)[..., None, None] * (_I2 - ee) + rhop[..., None, None] * ee

    def rbreaks(center_, t):
        return [float(s) for s in profile.nodes[1:-1]]

    return Deformation(
        eval=ev,
        grad=gr,
        singular_points=a[None, :],
        name="radial-profile",
        radial_breaks=rbreaks,
        metadata={"profile": profile, "center": tuple(a)},
    )


def compose(outer: Deformation, inner: Deformation) -> Deformation:
    """Composition outer(inner(x)) with chain-rule gradient; raises if the
    inner image leaves the outer map's domain (when one is declared)."""

    def ev(x):
        z = inner.eval(x)
        if outer.domain is not None:
            ok = outer.domain.contains(z, closed=True)
            if not np.all(ok):
                raise EvaluationDomainError(
                    "inner image leaves the outer deformation's domain"
                )
        return outer.eval(z)

    def gr(x):
        z = inner.eval(x)
        return outer.grad(z) @ inner.grad(x)

    return Deformation(
        eval=ev,
        grad=gr,
        domain=inner.domain,
        singular_points=inner.singular_points,
        grad_mode=("analytic"
                   if outer.grad_mode == inner.grad_mode == "analytic"
                   else "finite-difference"),
        name=f"{outer.name}*{inner.name}",
    )


# --------------------------------------------------------------------------
# catalog access

CATALOG_KEYS = ("radial", "change-of-reference", "superposition", "spike")


def make_example(key: str, b: float = 0.5) -> Deformation:
    """Catalog lookup by CLI key."""
    if key == "radial":
        return example_radial(b)
    if key == "change-of-reference":
        return example_change_of_reference(b)
    if key == "superposition":
        return example_superposition()
    if key == "spike":
        return example_spike()
    raise KeyError(f"unknown example {key!r}; choose from {CATALOG_KEYS}")
