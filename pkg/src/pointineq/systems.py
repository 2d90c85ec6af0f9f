"""Critical systems equivalent to the inequality, and checks on them.

* ``critical_residuals``: the scalar system A u = 0 and the vector system
  u_i sum_j (x_i - x_j)/|x_i - x_j|^3 u_j = 0.
* ``sphere_system``: the linear system sum_j (y_i - y_j)/|y_i - y_j|^3 v_j = 0
  for unit vectors y_i, as a dense (p(m+1), p) matrix, with ``spectrum`` for
  smallest-singular-value analysis.
* ``kelvin_identity_check`` / ``sphere_inner_identity_check``: exact algebraic
  identities relating these systems, evaluated numerically.
* ``infinity_residuals`` / ``augmented_ratio``: versions with the last point
  sent to infinity.
* ``sign_matrix``: the skew matrix sgn(k - s) with exact determinant and rank.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from pointineq.errors import (
    AnglesNotSortedError,
    DuplicateAnglesError,
    InputError,
    NonfiniteEntryError,
    ZeroWeightsError,
)
from pointineq.forms import Quotient, _cubed_differences, _weights, interaction_matrix
from pointineq.geometry import (
    PointConfig,
    SphereConfig,
    kelvin_guard,
    make_config,
    pairwise_distances,
    sphere_from_angles,
)

NULL_RTOL = 1e-9


@dataclass(frozen=True)
class CriticalResiduals:
    r1: np.ndarray  # (p,)
    r2: np.ndarray  # (p, m)

    def squared_norm(self) -> float:
        return float(self.r1 @ self.r1 + np.sum(self.r2 * self.r2))

    def to_dict(self) -> dict:
        return {"r1": self.r1.tolist(), "r2": self.r2.tolist(), "squared_norm": self.squared_norm()}


@dataclass(frozen=True)
class SphereSystemMatrix:
    mat: np.ndarray  # (p * (m + 1), p)
    p: int
    dim: int  # ambient dimension m + 1

    def block(self, i: int, j: int) -> np.ndarray:
        return self.mat[i * self.dim : (i + 1) * self.dim, j]

    def residuals(self, v) -> np.ndarray:
        """Stacked left sides of the sphere system, shape (p, m + 1)."""
        return (self.mat @ np.asarray(v, dtype=float)).reshape(self.p, self.dim)


@dataclass(frozen=True)
class SpectrumReport:
    singular_values: np.ndarray
    sigma_min: float
    null_candidate: np.ndarray
    residual_norm: float

    def has_null_vector(self, rtol: float = NULL_RTOL) -> bool:
        """sigma_min at or below ``rtol`` times the largest singular value."""
        top = float(self.singular_values[0]) if len(self.singular_values) else 0.0
        return self.sigma_min <= rtol * top

    def to_dict(self) -> dict:
        return {
            "singular_values": self.singular_values.tolist(),
            "sigma_min": self.sigma_min,
            "null_candidate": self.null_candidate.tolist(),
            "residual_norm": self.residual_norm,
        }


@dataclass(frozen=True)
class SignMatrix:
    c: tuple  # rows of Python ints
    det: int
    rank: int

    @property
    def p(self) -> int:
        return len(self.c)

    def to_dict(self) -> dict:
        return {"p": self.p, "det": str(self.det), "rank": self.rank}


class KelvinDeviations(NamedTuple):
    """Max deviation of each identity and the magnitude it is measured against."""

    scalar: float
    vector: float
    combined: float
    scalar_scale: float
    vector_scale: float
    combined_scale: float

    def relative(self) -> tuple:
        return tuple(
            dev / scale if scale > 0 else dev
            for dev, scale in (
                (self.scalar, self.scalar_scale),
                (self.vector, self.vector_scale),
                (self.combined, self.combined_scale),
            )
        )


def critical_residuals(config: PointConfig, u) -> CriticalResiduals:
    u = _weights(config, u)
    a = interaction_matrix(config)
    c = _cubed_differences(config.points, pairwise_distances(config))
    r1 = a @ u
    r2 = u[:, None] * np.einsum("ijm,j->im", c, u)
    return CriticalResiduals(r1=r1, r2=r2)


def _sphere_coefficients(y: np.ndarray) -> np.ndarray:
    d = np.sqrt(np.sum((y[:, None, :] - y[None, :, :]) ** 2, axis=-1))
    return _cubed_differences(y, d)


def _stack_blocks(coef: np.ndarray) -> np.ndarray:
    """(p, p, dim) coefficients -> (p * dim, p) matrix with block (i, j) = coef[i, j]."""
    p, _, dim = coef.shape
    return np.transpose(coef, (0, 2, 1)).reshape(p * dim, p)


def sphere_system(sphere: SphereConfig) -> SphereSystemMatrix:
    y = sphere.points
    return SphereSystemMatrix(_stack_blocks(_sphere_coefficients(y)), p=y.shape[0], dim=y.shape[1])


def spectrum(mat) -> SpectrumReport:
    """Full singular spectrum and a unit vector attaining the smallest value."""
    m = mat.mat if isinstance(mat, SphereSystemMatrix) else np.asarray(mat, dtype=float)
    m = np.atleast_2d(m)
    if not np.all(np.isfinite(m)):
        raise NonfiniteEntryError("matrix has non-finite entries")
    _, s, vt = np.linalg.svd(m, full_matrices=True)
    ncols = m.shape[1]
    if len(s) < ncols:
        # wide matrix: a right singular vector outside the row space is an exact null vector
        v = vt[-1]
        sigma_min = 0.0
    else:
        v = vt[len(s) - 1]
        sigma_min = float(s[-1])
    return SpectrumReport(
        singular_values=s,
        sigma_min=sigma_min,
        null_candidate=v,
        residual_norm=float(np.linalg.norm(m @ v)),
    )


def sphere_inner_identity_check(sphere: SphereConfig, v) -> float:
    """max_i |<2 y_i, sum_j c_ij v_j> - sum_j v_j/|y_i - y_j||.

    On the unit sphere |y_i - y_j|^2 = 2 - 2<y_i, y_j>, so this is zero for
    every v up to rounding.
    """
    y = sphere.points
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape[0] != y.shape[0]:
        raise InputError(f"weight vector has length {v.shape[0]}, config has p={y.shape[0]}")
    coef = _sphere_coefficients(y)
    lhs = 2.0 * np.einsum("im,ijm,j->i", y, coef, v)
    d = pairwise_distances(sphere)
    inv = np.zeros_like(d)
    off = ~np.eye(len(y), dtype=bool)
    inv[off] = 1.0 / d[off]
    rhs = inv @ v
    return float(np.max(np.abs(lhs - rhs)))


def kelvin_identity_check(config: PointConfig, u, center) -> KelvinDeviations:
    """Compare the critical residuals of (x, u) with their Kelvin-side forms.

    With y'_i = (x_i - N)/|x_i - N|^2 and v_i = |y'_i| u_i:

    (A) r1_i = |y'_i| sum_j v_j / |y'_i - y'_j|
    (B) r2_i = |y'_i| u_i sum_j (y'_i |y'_j|^2 - y'_j |y'_i|^2)/|y'_i - y'_j|^3 |y'_j| u_j
    (C) u_i y'_i r1_i + r2_i - 2 y'_i <r2_i, y'_i>/|y'_i|^2
          = |y'_i|^2 v_i sum_j (y'_i - y'_j)/|y'_i - y'_j|^3 v_j
    """
    u = _weights(config, u)
    n = np.asarray(center, dtype=float)
    kelvin_guard(config, n)
    res = critical_residuals(config, u)
    r1, r2 = res.r1, res.r2

    yp = config.points - n
    yp = yp / np.sum(yp * yp, axis=1, keepdims=True)
    ny = np.linalg.norm(yp, axis=1)
    v = ny * u
    p = len(u)
    off = ~np.eye(p, dtype=bool)
    dy = np.sqrt(np.sum((yp[:, None, :] - yp[None, :, :]) ** 2, axis=-1))
    inv = np.zeros_like(dy)
    inv[off] = 1.0 / dy[off]

    terms_a = inv * v[None, :]
    rhs_a = ny * terms_a.sum(axis=1)
    dev_a = np.abs(r1 - rhs_a)
    scale_a = ny * np.abs(terms_a).sum(axis=1) + np.abs(r1)

    inv3 = inv**3
    ny2 = ny**2
    num = yp[:, None, :] * ny2[None, :, None] - yp[None, :, :] * ny2[:, None, None]
    terms_b = num * (inv3 * (ny * u)[None, :])[:, :, None]
    rhs_b = (ny * u)[:, None] * terms_b.sum(axis=1)
    dev_b = np.linalg.norm(r2 - rhs_b, axis=1)
    scale_b = np.abs(ny * u) * np.linalg.norm(terms_b, axis=2).sum(axis=1) + np.linalg.norm(r2, axis=1)

    t1 = (u * r1)[:, None] * yp
    t3 = 2.0 * yp * (np.sum(r2 * yp, axis=1) / ny2)[:, None]
    lhs_c = t1 + r2 - t3
    terms_c = (yp[:, None, :] - yp[None, :, :]) * (inv3 * v[None, :])[:, :, None]
    rhs_c = (ny2 * v)[:, None] * terms_c.sum(axis=1)
    dev_c = np.linalg.norm(lhs_c - rhs_c, axis=1)
    scale_c = (
        np.linalg.norm(t1, axis=1)
        + np.linalg.norm(r2, axis=1)
        + np.linalg.norm(t3, axis=1)
        + np.abs(ny2 * v) * np.linalg.norm(terms_c, axis=2).sum(axis=1)
    )

    return KelvinDeviations(
        float(dev_a.max()),
        float(dev_b.max()),
        float(dev_c.max()),
        float(scale_a.max()),
        float(scale_b.max()),
        float(scale_c.max()),
    )


def _finite_points(points) -> np.ndarray:
    if isinstance(points, PointConfig):
        return points.points
    return make_config(points).points


def infinity_residuals(points, v):
    """Residuals of the critical system with the last point at infinity.

    ``points`` holds y_1..y_{p-1}; ``v`` has length p and v_p carries the
    point at infinity:
        r1_i = sum_{j<p, j != i} v_j/|y_i - y_j| + v_p
        r2_i = v_i sum_{j<p, j != i} (y_i - y_j)/|y_i - y_j|^3 v_j
    """
    y = _finite_points(points)
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape[0] != y.shape[0] + 1:
        raise InputError(f"expected {y.shape[0] + 1} weights, got {v.shape[0]}")
    cfg = PointConfig(y)
    vf = v[:-1]
    r1 = interaction_matrix(cfg) @ vf + v[-1]
    c = _cubed_differences(y, pairwise_distances(cfg))
    r2 = vf[:, None] * np.einsum("ijm,j->im", c, vf)
    return r1, r2


def augmented_quotient(points) -> Quotient:
    """The quotient over z = (u_1..u_{p-1}, u_tilde) for p-1 finite points."""
    y = _finite_points(points)
    cfg = PointConfig(y)
    k, m = y.shape
    a = interaction_matrix(cfg)
    mat = np.hstack([a, np.ones((k, 1))])
    weights = np.append(np.sum(a * a, axis=0), 1.0)
    c = _cubed_differences(y, pairwise_distances(cfg))
    bilinear = np.concatenate([c, np.zeros((k, 1, m))], axis=1)
    return Quotient(mat=mat, weights=weights, bilinear=bilinear)


def augmented_ratio(points, u, up_tilde: float) -> float:
    z = np.append(np.asarray(u, dtype=float).reshape(-1), float(up_tilde))
    q = augmented_quotient(points)
    if z.shape[0] != q.n:
        raise InputError(f"expected {q.n - 1} finite weights, got {z.shape[0] - 1}")
    if not np.any(z):
        raise ZeroWeightsError("weights are all zero")
    return q.exact_value(z)


# -- exact integer linear algebra ------------------------------------------


def bareiss_det(rows) -> int:
    """Determinant of a square integer matrix by fraction-free elimination."""
    a = [[int(x) for x in r] for r in rows]
    n = len(a)
    if any(len(r) != n for r in a):
        raise InputError("matrix is not square")
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if a[i][k] != 0), None)
            if swap is None:
                return 0
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                # exact: Sylvester's identity guarantees divisibility
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def integer_rank(rows) -> int:
    """Rank over the rationals via fraction-free row reduction."""
    a = [[int(x) for x in r] for r in rows]
    if not a:
        return 0
    nrows, ncols = len(a), len(a[0])
    rank = 0
    prev = 1
    for col in range(ncols):
        piv = next((i for i in range(rank, nrows) if a[i][col] != 0), None)
        if piv is None:
            continue
        a[rank], a[piv] = a[piv], a[rank]
        for i in range(rank + 1, nrows):
            for j in range(col + 1, ncols):
                a[i][j] = (a[i][j] * a[rank][col] - a[i][col] * a[rank][j]) // prev
            a[i][col] = 0
        prev = a[rank][col]
        rank += 1
        if rank == nrows:
            break
    return rank


def sign_matrix(p: int) -> SignMatrix:
    if p < 2:
        raise InputError("p must be at least 2")
    # row k, column s holds sgn(s - k): +1 above the diagonal
    c = tuple(tuple((s > k) - (s < k) for s in range(p)) for k in range(p))
    return SignMatrix(c=c, det=bareiss_det(c), rank=integer_rank(c))


# -- the unit circle -------------------------------------------------------


def _check_angles(angles) -> np.ndarray:
    a = np.asarray(angles, dtype=float).reshape(-1)
    if a.shape[0] < 2:
        raise InputError("need at least two angles")
    if not np.all(np.isfinite(a)):
        raise NonfiniteEntryError("angles must be finite")
    if np.any(a < 0.0) or np.any(a >= 2.0 * np.pi):
        raise InputError("angles must lie in [0, 2*pi)")
    gaps = np.diff(a)
    if np.any(gaps < 0.0):
        raise AnglesNotSortedError("angles must be strictly increasing")
    if np.any(gaps == 0.0):
        raise DuplicateAnglesError("repeated angle")
    return a


def chord_lengths(angles) -> np.ndarray:
    """2 |sin((a_k - a_j)/2)| for all pairs."""
    a = _check_angles(angles)
    return 2.0 * np.abs(np.sin((a[:, None] - a[None, :]) / 2.0))


def circle_system(angles) -> SphereSystemMatrix:
    """Sphere system for y_k = (cos a_k, sin a_k), built from half-angle identities.

    y_k - y_j = 2 sin((a_k - a_j)/2) e^{i (a_k + a_j + pi)/2}, so the
    (k, j) block is sgn(k - j) e^{i (a_k + a_j + pi)/2} / (4 sin^2((a_k - a_j)/2)).
    """
    a = _check_angles(angles)
    p = len(a)
    half = np.sin((a[:, None] - a[None, :]) / 2.0)
    theta = (a[:, None] + a[None, :] + np.pi) / 2.0
    sgn = np.sign(np.subtract.outer(np.arange(p), np.arange(p)))
    off = ~np.eye(p, dtype=bool)
    mag = np.zeros((p, p))
    mag[off] = sgn[off] / (4.0 * half[off] ** 2)
    coef = np.stack([mag * np.cos(theta), mag * np.sin(theta)], axis=-1)
    return SphereSystemMatrix(_stack_blocks(coef), p=p, dim=2)


def circle_config(angles) -> SphereConfig:
    return sphere_from_angles(_check_angles(angles))
