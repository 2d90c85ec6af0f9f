"""Point configurations and the transforms acting on them.

A configuration is an ordered tuple of p distinct points in R^m, stored as a
read-only ``(p, m)`` float array.  Everything here is a pure function.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pointineq import serialize
from pointineq.errors import (
    CenterTooCloseError,
    DimensionMismatchError,
    DuplicatePointsError,
    InputError,
    NonfiniteCoordinateError,
    NotOnSphereError,
)

DUPLICATE_RTOL = 1e-12
KELVIN_GUARD_RTOL = 1e-9
SPHERE_NORM_TOL = 1e-12
RANK_RTOL = 1e-10


def _as_point_array(points) -> np.ndarray:
    if isinstance(points, (PointConfig, SphereConfig)):
        return points.points
    if isinstance(points, np.ndarray):
        arr = np.array(points, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2:
            raise DimensionMismatchError(f"expected a (p, m) array, got shape {arr.shape}")
    else:
        rows = list(points)
        if not rows:
            raise InputError("empty point list")
        rows = [np.atleast_1d(np.asarray(r, dtype=float)) for r in rows]
        dims = {r.shape for r in rows}
        if len(dims) != 1 or rows[0].ndim != 1:
            raise DimensionMismatchError(f"points have differing shapes {sorted(dims)}")
        arr = np.stack(rows)
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise InputError("empty point list")
    if not np.all(np.isfinite(arr)):
        raise NonfiniteCoordinateError("coordinates must be finite")
    return arr


def _distance_matrix(x: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - x[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def _check_distinct(x: np.ndarray) -> np.ndarray:
    d = _distance_matrix(x)
    p = len(x)
    if p < 2:
        return d
    diameter = d.max()
    off = d[~np.eye(p, dtype=bool)]
    if diameter == 0.0 or off.min() < DUPLICATE_RTOL * diameter:
        i, j = np.argwhere((d < max(DUPLICATE_RTOL * diameter, 1e-300)) & ~np.eye(p, dtype=bool))[0]
        raise DuplicatePointsError(f"points {i} and {j} coincide (distance {d[i, j]:.3g})")
    return d


def _frozen(x: np.ndarray) -> np.ndarray:
    x = np.array(x, dtype=float)
    x.setflags(write=False)
    return x


@dataclass(frozen=True, eq=False)
class PointConfig:
    """p >= 2 distinct points in R^m, as a read-only (p, m) array."""

    points: np.ndarray

    @property
    def p(self) -> int:
        return self.points.shape[0]

    @property
    def m(self) -> int:
        return self.points.shape[1]

    @property
    def diameter(self) -> float:
        return float(pairwise_distances(self).max())

    def __len__(self):
        return self.p

    def __eq__(self, other):
        return isinstance(other, PointConfig) and np.array_equal(self.points, other.points)

    def to_dict(self) -> dict:
        return {"p": self.p, "m": self.m, "points": self.points.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "PointConfig":
        cfg = make_config(doc["points"])
        if "p" in doc and int(doc["p"]) != cfg.p:
            raise DimensionMismatchError(f"document says p={doc['p']} but has {cfg.p} points")
        if "m" in doc and int(doc["m"]) != cfg.m:
            raise DimensionMismatchError(f"document says m={doc['m']} but points are in R^{cfg.m}")
        return cfg


@dataclass(frozen=True, eq=False)
class SphereConfig:
    """p >= 2 distinct unit vectors in R^(m+1); ``m`` is the sphere dimension."""

    points: np.ndarray

    @property
    def p(self) -> int:
        return self.points.shape[0]

    @property
    def m(self) -> int:
        return self.points.shape[1] - 1

    def __len__(self):
        return self.p

    def __eq__(self, other):
        return isinstance(other, SphereConfig) and np.array_equal(self.points, other.points)

    def to_dict(self) -> dict:
        return {"p": self.p, "m": self.m, "points": self.points.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "SphereConfig":
        return make_sphere_config(doc["points"])


@dataclass(frozen=True)
class SimilarityMap:
    """x -> scale * rotation @ x + translation."""

    translation: np.ndarray
    rotation: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.translation, dtype=float))
        r = np.atleast_2d(np.asarray(self.rotation, dtype=float))
        m = t.shape[0]
        if r.shape != (m, m):
            raise DimensionMismatchError(f"rotation shape {r.shape} does not match translation length {m}")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(r)) and np.isfinite(self.scale)):
            raise NonfiniteCoordinateError("similarity map entries must be finite")
        if not np.allclose(r.T @ r, np.eye(m), rtol=0.0, atol=1e-12):
            raise InputError("rotation is not orthogonal within 1e-12")
        if not self.scale > 0:
            raise InputError("scale must be positive")
        object.__setattr__(self, "translation", _frozen(t))
        object.__setattr__(self, "rotation", _frozen(r))
        object.__setattr__(self, "scale", float(self.scale))

    @classmethod
    def identity(cls, m: int) -> "SimilarityMap":
        return cls(np.zeros(m), np.eye(m), 1.0)

    @classmethod
    def random(cls, m: int, rng: np.random.Generator, scale_range=(0.1, 10.0)) -> "SimilarityMap":
        q, r = np.linalg.qr(rng.standard_normal((m, m)))
        q = q * np.sign(np.diag(r))
        lo, hi = np.log(scale_range[0]), np.log(scale_range[1])
        return cls(rng.normal(scale=5.0, size=m), q, float(np.exp(rng.uniform(lo, hi))))


def make_config(points) -> PointConfig:
    """Validate ``points`` (a list of vectors or a (p, m) array) into a PointConfig.

    Raises DimensionMismatchError for ragged input, NonfiniteCoordinateError for
    nan/inf, and DuplicatePointsError when two points are closer than
    1e-12 times the diameter.
    """
    x = _as_point_array(points)
    if x.shape[0] < 2:
        raise InputError("a configuration needs at least two points")
    _check_distinct(x)
    return PointConfig(_frozen(x))


def make_sphere_config(points) -> SphereConfig:
    y = _as_point_array(points)
    if y.shape[0] < 2:
        raise InputError("a configuration needs at least two points")
    if y.shape[1] < 2:
        raise DimensionMismatchError("sphere points live in R^(m+1) with m >= 1")
    norms = np.linalg.norm(y, axis=1)
    if np.any(np.abs(norms - 1.0) > SPHERE_NORM_TOL):
        k = int(np.argmax(np.abs(norms - 1.0)))
        raise NotOnSphereError(f"point {k} has norm {norms[k]!r}")
    _check_distinct(y)
    return SphereConfig(_frozen(y))


def sphere_from_angles(angles) -> SphereConfig:
    a = np.asarray(angles, dtype=float)
    return make_sphere_config(np.column_stack([np.cos(a), np.sin(a)]))


def pairwise_distances(config) -> np.ndarray:
    """Symmetric (p, p) matrix of Euclidean distances, zero on the diagonal."""
    return _distance_matrix(config.points)


def normalize_config(config: PointConfig) -> PointConfig:
    """Relabel and rescale so the closest pair is points 0, 1 at distance 1.

    Of the closest pair (lexicographically first on ties) the point with the
    smaller original index goes to the origin.  The remaining points follow in
    order of distance from it, ties broken by original index.  A Householder
    reflection (identity when already aligned) puts the second point at e_1.
    """
    x = config.points
    p = len(x)
    d = pairwise_distances(config)
    masked = d + np.diag(np.full(p, np.inf))
    flat = int(np.argmin(masked))  # row-major: lexicographically first minimum
    i, j = divmod(flat, p)
    i, j = min(i, j), max(i, j)
    dmin = d[i, j]
    rest = sorted((k for k in range(p) if k not in (i, j)), key=lambda k: (d[i, k], k))
    order = [i, j] + rest
    y = (x[order] - x[i]) / dmin
    # reflect so the second point sits on the positive first axis
    v = y[1].copy()
    v[0] -= 1.0
    nv = v @ v
    if nv > 1e-30:
        y = y - np.outer(y @ v, v) * (2.0 / nv)
    y[1] = 0.0
    y[1, 0] = 1.0
    return PointConfig(_frozen(y))


def apply_similarity(config: PointConfig, sim: SimilarityMap) -> PointConfig:
    if sim.translation.shape[0] != config.m:
        raise DimensionMismatchError(f"map acts on R^{sim.translation.shape[0]}, config is in R^{config.m}")
    y = sim.scale * config.points @ sim.rotation.T + sim.translation
    return make_config(y)


def kelvin_point(x, center) -> np.ndarray:
    """Inversion in the unit sphere about ``center``: N + (x - N) / |x - N|^2."""
    x = np.asarray(x, dtype=float)
    n = np.asarray(center, dtype=float)
    dx = x - n
    return n + dx / np.sum(dx * dx, axis=-1, keepdims=True)


def kelvin_guard(config, center, guard: float | None = None) -> np.ndarray:
    """Return |x_i - N| after checking it against the guard threshold."""
    n = np.atleast_1d(np.asarray(center, dtype=float))
    if n.shape != (config.points.shape[1],):
        raise DimensionMismatchError(f"center has shape {n.shape}, points are in R^{config.points.shape[1]}")
    if not np.all(np.isfinite(n)):
        raise NonfiniteCoordinateError("center must be finite")
    if guard is None:
        guard = KELVIN_GUARD_RTOL * float(pairwise_distances(config).max())
    r = np.linalg.norm(config.points - n, axis=1)
    if np.any(r < guard) or np.any(r == 0.0):
        k = int(np.argmin(r))
        raise CenterTooCloseError(f"center is {r[k]:.3g} from point {k} (guard {guard:.3g})")
    return r


def kelvin_transform(config: PointConfig, center, guard: float | None = None) -> PointConfig:
    kelvin_guard(config, center, guard)
    return make_config(kelvin_point(config.points, np.asarray(center, dtype=float)))


def stereographic_lift(config: PointConfig) -> SphereConfig:
    """Send R^m onto the unit sphere S^m in R^(m+1).

    Embed x as (x, 0), invert about the pole N = e_{m+1} (this lands on the
    sphere of radius 1/2 centred at N/2), then translate by -N/2 and scale by
    2.  The origin goes to the south pole -e_{m+1}.
    """
    x = config.points
    p, m = x.shape
    pole = np.zeros(m + 1)
    pole[-1] = 1.0
    lifted = np.hstack([x, np.zeros((p, 1))])
    y = 2.0 * (kelvin_point(lifted, pole) - 0.5 * pole)
    # the images are on the sphere up to rounding; snap to exact unit norm
    y /= np.linalg.norm(y, axis=1, keepdims=True)
    return make_sphere_config(y)


def affine_rank(config: PointConfig, rtol: float = RANK_RTOL) -> int:
    """Numerical rank of {x_i - x_0} from its singular values."""
    diff = config.points[1:] - config.points[0]
    s = np.linalg.svd(diff, compute_uv=False)
    scale = float(pairwise_distances(config).max())
    return int(np.sum(s > rtol * scale))


def affine_reduce(config: PointConfig, rtol: float = RANK_RTOL) -> PointConfig:
    """Isometric re-coordinatisation in the affine span of the points.

    The basis is built by Gram-Schmidt on x_i - x_0 in index order, with one
    re-orthogonalisation pass; directions with residual norm at or below
    ``rtol`` times the diameter are dropped.
    """
    x = config.points
    scale = float(pairwise_distances(config).max())
    basis: list[np.ndarray] = []
    for v in x[1:] - x[0]:
        w = v.copy()
        for _ in range(2):
            for q in basis:
                w -= (q @ w) * q
        nw = np.linalg.norm(w)
        if nw > rtol * scale:
            basis.append(w / nw)
        if len(basis) == config.m:
            break
    q = np.array(basis)
    return PointConfig(_frozen((x - x[0]) @ q.T))


def load_config(path) -> PointConfig:
    return PointConfig.from_dict(serialize.read_document(path))


def save_config(path, config) -> None:
    serialize.write_document(path, config.to_dict())
