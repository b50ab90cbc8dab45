"""Points, q-norms, flaw configurations, perforated domains, and small-matrix helpers.

Vectors are plain numpy arrays of shape (..., 2); 2x2 matrices have shape
(..., 2, 2). All operations broadcast over leading axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when a pseudoinverse is requested for a rank-deficient matrix."""


def qnorm(x, q):
    """q-norm of planar vectors; q may be any real >= 1 or inf."""
    if q < 1:
        raise ValueError(f"q-norm requires q >= 1, got {q}")
    x = np.asarray(x, dtype=float)
    a = np.abs(x)
    if math.isinf(q):
        return np.max(a, axis=-1)
    if q == 1:
        return np.sum(a, axis=-1)
    if q == 2:
        return np.sqrt(np.sum(x * x, axis=-1))
    return np.sum(a**q, axis=-1) ** (1.0 / q)


def det2(F):
    F = np.asarray(F, dtype=float)
    return F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]


def cof2(F):
    """Cofactor matrix: entry (i,j) is the signed minor of F[i,j]."""
    F = np.asarray(F, dtype=float)
    out = np.empty_like(F)
    out[..., 0, 0] = F[..., 1, 1]
    out[..., 0, 1] = -F[..., 1, 0]
    out[..., 1, 0] = -F[..., 0, 1]
    out[..., 1, 1] = F[..., 0, 0]
    return out


def adj2(F):
    """Adjugate (transpose of the cofactor matrix); F @ adj2(F) = det2(F) I."""
    return np.swapaxes(cof2(F), -1, -2)


def pseudoinverse(H):
    """Left pseudoinverse (H^T H)^{-1} H^T of a tall full-column-rank matrix.

    Satisfies pinv @ H = I, and H @ pinv v is the orthogonal projection of v
    onto the column span of H.

    Raises:
        SingularMatrixError: if H does not have full column rank.
    """
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] < H.shape[1]:
        raise ValueError(f"expected a tall matrix, got shape {H.shape}")
    G = H.T @ H
    # rank check before solving: tiny det relative to scale means rank deficiency
    scale = np.sum(H * H)
    if scale == 0.0 or np.linalg.det(G) <= 1e-24 * (scale / H.shape[1]) ** H.shape[1]:
        raise SingularMatrixError("matrix is rank deficient")
    return np.linalg.solve(G, H.T)


# --------------------------------------------------------------------------
# confinement sets for flaw points


@dataclass(frozen=True)
class Confinement:
    """Compact region holding candidate flaw points: a closed disk or a closed
    axis-aligned square.  `size` is the disk radius or the square half-width.
    """

    kind: str  # "disk" | "square"
    center: tuple[float, float] = (0.0, 0.0)
    size: float = 0.6

    def __post_init__(self):
        if self.kind not in ("disk", "square"):
            raise ValueError(f"unknown confinement kind {self.kind!r}")
        if self.size <= 0:
            raise ValueError("confinement size must be positive")

    def contains(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        d = pts - np.asarray(self.center)
        if self.kind == "disk":
            return qnorm(d, 2) <= self.size + 1e-12
        return qnorm(d, np.inf) <= self.size + 1e-12

    def max_qnorm(self, q) -> float:
        """Largest |x|_q over the region (used for boundary-margin checks)."""
        c = np.asarray(self.center, dtype=float)
        if self.kind == "disk":
            # sup over the euclidean disk of a q-norm is |c|_q + size * |.|_q->2 gain
            gain = {1: math.sqrt(2.0), 2: 1.0}.get(q, 1.0 if math.isinf(q) else None)
            if gain is None:  # generic q: bound via corner direction
                gain = qnorm(np.array([1.0, 1.0]) / math.sqrt(2.0), q)
            return float(qnorm(c, q) + self.size * gain)
        corners = c + self.size * np.array(
            [[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float
        )
        return float(np.max(qnorm(corners, q)))

    def grid(self, n: int) -> np.ndarray:
        """n x n grid of candidate points covering the region."""
        c = np.asarray(self.center, dtype=float)
        u = np.linspace(-self.size, self.size, n)
        xx, yy = np.meshgrid(u, u)
        pts = np.stack([xx.ravel(), yy.ravel()], axis=-1) + c
        return pts[self.contains(pts)]


def tight_confinement(points) -> Confinement:
    """Smallest practical disk confinement holding the given flaw points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    center = pts.mean(axis=0)
    radius = float(np.max(qnorm(pts - center, 2))) if len(pts) else 0.0
    return Confinement("disk", (float(center[0]), float(center[1])),
                       max(radius * 1.001, 1e-6))


@dataclass(frozen=True)
class FlawConfig:
    """A finite set of flaw points with a core radius and confinement data.

    Fields mirror the admissibility constraints: at most `max_count` points,
    all inside `confinement`, pairwise separated by at least 3 * eps.
    """

    points: np.ndarray
    eps: float
    max_count: int = 1
    confinement: Confinement = field(default_factory=lambda: Confinement("disk"))

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        object.__setattr__(self, "points", pts)
        if self.eps <= 0:
            raise ValueError("core radius eps must be positive")
        if self.max_count < 1:
            raise ValueError("max_count must be at least 1")

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class Domain:
    """Reference domain: the open q-ball B_q(0, radius) for q in {1, 2, inf},
    optionally perforated by the closed disks of a FlawConfig.
    """

    q: float = 2.0
    radius: float = 1.0
    flaws: FlawConfig | None = None

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("domain radius must be positive")

    def area(self) -> float:
        if self.q == 1:
            return 2.0 * self.radius**2
        if self.q == 2:
            return math.pi * self.radius**2
        if math.isinf(self.q):
            return 4.0 * self.radius**2
        raise NotImplementedError("area only implemented for q in {1, 2, inf}")

    def contains(self, pts, *, closed: bool = False) -> np.ndarray:
        """Membership in the outer q-ball (open by default)."""
        pts = np.asarray(pts, dtype=float)
        n = qnorm(pts, self.q)
        return n <= self.radius if closed else n < self.radius

    def contains_perforated(self, pts) -> np.ndarray:
        """Membership in the perforated domain: inside, strictly outside every
        closed flaw disk. Sphere points are excluded robustly (a 1e-12
        relative band absorbs roundoff in the radius comparison)."""
        inside = self.contains(pts)
        if self.flaws is not None:
            pts = np.asarray(pts, dtype=float)
            eps = self.flaws.eps
            for a in self.flaws.points:
                inside = inside & (qnorm(pts - a, 2) > eps * (1.0 + 1e-12))
        return inside

    def contains_perforated_closure_holes(self, pts) -> np.ndarray:
        """Membership in the domain minus the *open* flaw disks: sphere points
        are included (same roundoff band as contains_perforated)."""
        inside = self.contains(pts)
        if self.flaws is not None:
            pts = np.asarray(pts, dtype=float)
            eps = self.flaws.eps
            for a in self.flaws.points:
                inside = inside & (qnorm(pts - a, 2) >= eps * (1.0 - 1e-12))
        return inside

    def dist_to_boundary(self, pts) -> np.ndarray:
        """Euclidean distance from interior points to the outer boundary."""
        pts = np.asarray(pts, dtype=float)
        n = qnorm(pts, self.q)
        if self.q == 1:
            return (self.radius - n) / math.sqrt(2.0)
        if self.q == 2 or math.isinf(self.q):
            return self.radius - n
        raise NotImplementedError


def boundary_margin(confinement: Confinement, outer: Domain) -> float:
    """Euclidean distance between the confinement region and the outer boundary."""
    m = confinement.max_qnorm(outer.q)
    gap = outer.radius - m
    if outer.q == 1:
        return gap / math.sqrt(2.0)
    return gap


@dataclass(frozen=True)
class ValidityReport:
    ok: bool
    violations: tuple[str, ...]

    def __str__(self):
        return "valid" if self.ok else "; ".join(self.violations)


def validate_flaw_config(cfg: FlawConfig, outer: Domain) -> ValidityReport:
    """Check every flaw-set invariant and report all violations (never raises).

    Checks: cardinality bound, confinement of each point, pairwise 3*eps
    separation, and eps < dist(confinement, boundary).
    """
    violations: list[str] = []
    pts = cfg.points
    if len(pts) > cfg.max_count:
        violations.append(f"count {len(pts)} exceeds max_count {cfg.max_count}")
    inside = cfg.confinement.contains(pts)
    for i in np.nonzero(~inside)[0]:
        violations.append(f"point {i} at {tuple(pts[i])} outside confinement")
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            d = float(qnorm(pts[i] - pts[j], 2))
            if d < 3.0 * cfg.eps - 1e-12:
                violations.append(
                    f"points {i},{j} separated by {d:.6g} < 3*eps = {3 * cfg.eps:.6g}"
                )
    margin = boundary_margin(cfg.confinement, outer)
    if not cfg.eps < margin:
        violations.append(
            f"eps = {cfg.eps:.6g} not below boundary margin {margin:.6g}"
        )
    return ValidityReport(ok=not violations, violations=tuple(violations))
