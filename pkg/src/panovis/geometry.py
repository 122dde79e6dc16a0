"""Homography estimation and projective geometry.

Homographies map points of one image plane onto another and are defined up
to scale; we store the canonical representative with m[2][2] = 1 so that
serialized matrices are byte-reproducible. Estimation follows the classic
recipe: direct linear transform with Hartley point normalization, RANSAC
over minimal 4-point samples, and Levenberg-Marquardt polish of the eight
free parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import (
    DegenerateConfiguration,
    InsufficientPairs,
    NoModelFound,
    PointAtInfinity,
    SingularNormalEquations,
)

if TYPE_CHECKING:
    from .ingest import Intrinsics

_EPS_W = 1e-12
_EPS_DET = 1e-12


@dataclass(frozen=True, eq=False)
class Homography:
    """3x3 projective transform, normalized so m[2][2] = 1."""

    m: np.ndarray

    @staticmethod
    def from_matrix(m: np.ndarray) -> "Homography":
        m = np.asarray(m, dtype=np.float64)
        if m.shape != (3, 3) or not np.all(np.isfinite(m)):
            raise DegenerateConfiguration("homography must be a finite 3x3 matrix")
        if abs(m[2, 2]) < _EPS_W:
            raise DegenerateConfiguration("m[2][2] ~ 0, no canonical normalization")
        m = m / m[2, 2]
        if abs(np.linalg.det(m)) < _EPS_DET:
            raise DegenerateConfiguration("homography is not invertible")
        m.setflags(write=False)
        return Homography(m)

    @staticmethod
    def identity() -> "Homography":
        return Homography.from_matrix(np.eye(3))

    @staticmethod
    def translation(tx: float, ty: float) -> "Homography":
        m = np.eye(3)
        m[0, 2] = tx
        m[1, 2] = ty
        return Homography.from_matrix(m)

    @staticmethod
    def scaling(sx: float, sy: float | None = None) -> "Homography":
        sy = sx if sy is None else sy
        return Homography.from_matrix(np.diag([sx, sy, 1.0]))

    @staticmethod
    def rotation(angle_rad: float, center: tuple[float, float] = (0.0, 0.0)) -> "Homography":
        """Rotation about ``center``, counter-clockwise in image axes."""
        c, s = math.cos(angle_rad), math.sin(angle_rad)
        cx, cy = center
        m = np.array([
            [c, -s, cx - c * cx + s * cy],
            [s, c, cy - s * cx - c * cy],
            [0.0, 0.0, 1.0],
        ])
        return Homography.from_matrix(m)

    def inverse(self) -> "Homography":
        return Homography.from_matrix(np.linalg.inv(self.m))

    def __matmul__(self, other: "Homography") -> "Homography":
        return Homography.from_matrix(self.m @ other.m)

    def as_flat(self) -> list[float]:
        """Row-major 9-float serialization (m[2][2] is always 1)."""
        return [float(v) for v in self.m.reshape(-1)]

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Homography) and np.array_equal(self.m, other.m)


@dataclass(frozen=True)
class PointPair:
    """A correspondence: src in the non-base frame, dst in the base frame."""

    src: tuple[float, float]
    dst: tuple[float, float]


@dataclass(frozen=True)
class SVD3:
    """SVD of a 3x3 matrix: input = U @ diag(sigma) @ V.T, sigma descending."""

    U: np.ndarray
    sigma: tuple[float, float, float]
    V: np.ndarray


@dataclass(frozen=True)
class RansacResult:
    homography: Homography
    inlier_mask: np.ndarray
    iterations_run: int


def project_point(H: Homography, p: Sequence[float]) -> tuple[float, float]:
    """Apply H to a point in heterogeneous coordinates and dehomogenize."""
    u, v, w = H.m @ (p[0], p[1], 1.0)
    if abs(w) <= _EPS_W:
        raise PointAtInfinity(f"point {tuple(p)} maps to infinity")
    return (u / w, v / w)


def project_points(H: Homography, pts: np.ndarray) -> np.ndarray:
    """Vectorized project_point over an (n, 2) array; raises if any w ~ 0."""
    pts = np.asarray(pts, dtype=np.float64)
    hom = np.column_stack([pts, np.ones(len(pts))])
    proj = hom @ H.m.T
    w = proj[:, 2]
    if np.any(np.abs(w) <= _EPS_W):
        raise PointAtInfinity("projection hits the line at infinity")
    return proj[:, :2] / w[:, None]


def project_corners(H: Homography, width: float, height: float) -> np.ndarray:
    """Images of the frame corners, clockwise from top-left, as a (4, 2) array."""
    corners = np.array([
        [0.0, 0.0],
        [float(width), 0.0],
        [float(width), float(height)],
        [0.0, float(height)],
    ])
    return project_points(H, corners)


def reprojection_error(H: Homography, pair: PointPair) -> float:
    """Euclidean distance between H(src) and dst, in pixels."""
    u, v = project_point(H, pair.src)
    return math.hypot(u - pair.dst[0], v - pair.dst[1])


def projection_errors(H: Homography, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Forward reprojection errors for correspondence arrays; inf where w ~ 0."""
    hom = np.column_stack([src, np.ones(len(src))])
    proj = hom @ H.m.T
    w = proj[:, 2]
    err = np.full(len(src), np.inf)
    ok = np.abs(w) > _EPS_W
    diff = proj[ok, :2] / w[ok, None] - dst[ok]
    err[ok] = np.hypot(diff[:, 0], diff[:, 1])
    return err


def _pairs_to_arrays(pairs: Sequence[PointPair]) -> tuple[np.ndarray, np.ndarray]:
    src = np.array([p.src for p in pairs], dtype=np.float64)
    dst = np.array([p.dst for p in pairs], dtype=np.float64)
    return src, dst


def _hartley_transform(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Translate centroid to origin and scale mean distance to sqrt(2)."""
    centroid = pts.mean(axis=0)
    mean_dist = np.hypot(*(pts - centroid).T).mean()
    if mean_dist < 1e-12:
        raise DegenerateConfiguration("all points coincide")
    s = math.sqrt(2.0) / mean_dist
    T = np.array([
        [s, 0.0, -s * centroid[0]],
        [0.0, s, -s * centroid[1]],
        [0.0, 0.0, 1.0],
    ])
    return (pts - centroid) * s, T


def has_collinear_triple(pts: np.ndarray, rel_tol: float = 1e-8) -> bool:
    """True if any 3 of the given points are (nearly) collinear."""
    n = len(pts)
    for i in range(n - 2):
        for j in range(i + 1, n - 1):
            for k in range(j + 1, n):
                a, b, c = pts[i], pts[j], pts[k]
                area2 = abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
                scale = max(
                    np.sum((b - a) ** 2), np.sum((c - a) ** 2), np.sum((c - b) ** 2), 1.0
                )
                if area2 <= rel_tol * scale:
                    return True
    return False


def dlt_homography(pairs: Sequence[PointPair]) -> Homography:
    """Least-squares homography from >= 4 correspondences.

    Builds the standard 2n x 9 system on Hartley-normalized points and takes
    the right singular vector of the smallest singular value.
    """
    if len(pairs) < 4:
        raise InsufficientPairs(f"need >= 4 pairs, got {len(pairs)}")
    src, dst = _pairs_to_arrays(pairs)
    if not (np.all(np.isfinite(src)) and np.all(np.isfinite(dst))):
        raise DegenerateConfiguration("non-finite correspondence coordinates")
    src_n, t_src = _hartley_transform(src)
    dst_n, t_dst = _hartley_transform(dst)

    n = len(pairs)
    a = np.zeros((2 * n, 9))
    x, y = src_n[:, 0], src_n[:, 1]
    u, v = dst_n[:, 0], dst_n[:, 1]
    a[0::2, 0] = -x
    a[0::2, 1] = -y
    a[0::2, 2] = -1.0
    a[0::2, 6] = u * x
    a[0::2, 7] = u * y
    a[0::2, 8] = u
    a[1::2, 3] = -x
    a[1::2, 4] = -y
    a[1::2, 5] = -1.0
    a[1::2, 6] = v * x
    a[1::2, 7] = v * y
    a[1::2, 8] = v

    _, s, vt = np.linalg.svd(a)
    # A unique (up to scale) solution needs rank 8: the second-smallest
    # singular value must be clearly nonzero.
    if s[7] <= 1e-9 * max(s[0], 1.0):
        raise DegenerateConfiguration("DLT system is rank-deficient")
    h_norm = vt[-1].reshape(3, 3)
    h = np.linalg.inv(t_dst) @ h_norm @ t_src
    if abs(h[2, 2]) < _EPS_W or abs(np.linalg.det(h)) < _EPS_DET:
        raise DegenerateConfiguration("estimated homography is degenerate")
    return Homography.from_matrix(h)


def ransac_homography(
    pairs: Sequence[PointPair],
    reproj_thresh: float = 3.0,
    confidence: float = 0.995,
    max_iters: int = 2000,
    seed: int = 0,
) -> RansacResult:
    """Robust homography fit over minimal 4-point samples.

    A pair is an inlier when its forward reprojection error is below
    ``reproj_thresh``. The iteration budget adapts to the best inlier ratio
    seen so far; the winning model is re-fit on all of its inliers.
    Deterministic for a fixed seed.
    """
    if len(pairs) < 4:
        raise InsufficientPairs(f"need >= 4 pairs, got {len(pairs)}")
    if reproj_thresh <= 0:
        raise ValueError("reproj_thresh must be positive")
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must be in (0, 1)")
    src, dst = _pairs_to_arrays(pairs)
    n = len(pairs)
    rng = np.random.default_rng(seed)

    best_count = 0
    best_mask: np.ndarray | None = None
    best_h: Homography | None = None
    target = max_iters
    it = 0
    while it < target:
        it += 1
        idx = rng.choice(n, size=4, replace=False)
        if has_collinear_triple(src[idx]) or has_collinear_triple(dst[idx]):
            continue
        try:
            h = dlt_homography([pairs[i] for i in idx])
        except DegenerateConfiguration:
            continue
        mask = projection_errors(h, src, dst) < reproj_thresh
        count = int(mask.sum())
        if count > best_count:
            best_count, best_mask, best_h = count, mask, h
            w = count / n
            miss = 1.0 - w**4
            if miss <= 0.0:
                target = it
            elif miss < 1.0:
                needed = math.ceil(math.log(1.0 - confidence) / math.log(miss))
                target = min(max_iters, max(it, needed))

    if best_h is None or best_mask is None or best_count < 4:
        raise NoModelFound("no 4-point sample produced >= 4 inliers")

    try:
        refit = dlt_homography([p for p, keep in zip(pairs, best_mask) if keep])
        refit_mask = projection_errors(refit, src, dst) < reproj_thresh
        if int(refit_mask.sum()) >= 4:
            return RansacResult(refit, refit_mask, it)
    except DegenerateConfiguration:
        pass
    return RansacResult(best_h, best_mask, it)


def _residuals(params: np.ndarray, src_h: np.ndarray, dst: np.ndarray) -> np.ndarray | None:
    """Stacked (proj - dst) residuals for the 8-parameter model, or None if
    any point hits the line at infinity."""
    h = np.append(params, 1.0).reshape(3, 3)
    proj = src_h @ h.T
    w = proj[:, 2]
    if np.any(np.abs(w) <= _EPS_W):
        return None
    r = proj[:, :2] / w[:, None] - dst
    if not np.all(np.isfinite(r)):
        return None
    return r.reshape(-1)


def refine_lm(
    H: Homography,
    inliers: Sequence[PointPair],
    max_iterations: int = 100,
    rel_tol: float = 1e-10,
) -> Homography:
    """Levenberg-Marquardt refinement of the 8 free homography parameters.

    Minimizes the summed squared forward reprojection error with a numeric
    central-difference Jacobian. Damping starts at 1e-3, grows x10 on a
    failed step and shrinks x0.1 on an accepted one. The returned cost never
    exceeds the input cost; if no step improves it the input comes back
    unchanged.
    """
    if len(inliers) < 4:
        raise InsufficientPairs(f"need >= 4 inliers, got {len(inliers)}")
    src, dst = _pairs_to_arrays(inliers)
    src_h = np.column_stack([src, np.ones(len(src))])

    params = H.m.reshape(-1)[:8].copy()
    r = _residuals(params, src_h, dst)
    if r is None:
        raise PointAtInfinity("an inlier projects to infinity under the input H")
    cost = float(r @ r)

    lam = 1e-3
    consecutive_failures = 0
    saw_solve_failure = False
    for _ in range(max_iterations):
        jac = np.zeros((r.size, 8))
        ok = True
        for j in range(8):
            step = 1e-6 * max(1.0, abs(params[j]))
            plus = params.copy()
            plus[j] += step
            minus = params.copy()
            minus[j] -= step
            rp = _residuals(plus, src_h, dst)
            rm = _residuals(minus, src_h, dst)
            if rp is None or rm is None:
                ok = False
                break
            jac[:, j] = (rp - rm) / (2.0 * step)
        if not ok:
            # Cannot linearize here; treat like a failed solve.
            consecutive_failures += 1
            saw_solve_failure = True
            lam *= 10.0
            if consecutive_failures >= 20:
                raise SingularNormalEquations("Jacobian undefined near current estimate")
            continue

        jtj = jac.T @ jac
        g = jac.T @ r
        diag = np.diag(jtj).copy()

        accepted = False
        while not accepted:
            a = jtj + lam * np.diag(diag)
            try:
                delta = np.linalg.solve(a, -g)
                if not np.all(np.isfinite(delta)):
                    raise np.linalg.LinAlgError("non-finite step")
            except np.linalg.LinAlgError:
                consecutive_failures += 1
                saw_solve_failure = True
                lam *= 10.0
                if consecutive_failures >= 20:
                    raise SingularNormalEquations(
                        "normal equations stay singular after 20 damping escalations"
                    )
                continue
            candidate = params + delta
            r_new = _residuals(candidate, src_h, dst)
            new_cost = float(r_new @ r_new) if r_new is not None else math.inf
            if r_new is not None and new_cost < cost:
                params = candidate
                r = r_new
                improvement = (cost - new_cost) / max(cost, 1e-300)
                cost = new_cost
                lam *= 0.1
                consecutive_failures = 0
                saw_solve_failure = False
                accepted = True
            else:
                consecutive_failures += 1
                lam *= 10.0
                if consecutive_failures >= 20:
                    if saw_solve_failure:
                        raise SingularNormalEquations(
                            "normal equations stay singular after 20 damping escalations"
                        )
                    return Homography.from_matrix(np.append(params, 1.0).reshape(3, 3))
        if improvement < rel_tol:
            break
    return Homography.from_matrix(np.append(params, 1.0).reshape(3, 3))


def lm_cost(H: Homography, pairs: Sequence[PointPair]) -> float:
    """The objective refine_lm minimizes: sum of squared reprojection errors."""
    src, dst = _pairs_to_arrays(pairs)
    err = projection_errors(H, src, dst)
    return float(np.sum(err**2))


def calibrate_homography(H: Homography, K: "Intrinsics") -> np.ndarray:
    """Conjugate H by the intrinsics matrix: K @ H @ K^-1.

    The result factors camera geometry out of the plane transform so its
    singular values measure directional stretch; it is generally not
    normalized and is returned as a raw 3x3 array.
    """
    k = K.matrix()
    return k @ H.m @ K.inverse_matrix()


def svd3(m: np.ndarray) -> SVD3:
    """Singular value decomposition of a 3x3 matrix, sigma descending."""
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (3, 3) or not np.all(np.isfinite(m)):
        raise ValueError("svd3 expects a finite 3x3 matrix")
    u, s, vt = np.linalg.svd(m)
    return SVD3(u, (float(s[0]), float(s[1]), float(s[2])), vt.T)
