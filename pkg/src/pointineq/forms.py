"""Interaction matrix, its gradient, and the two sides of the inequality.

For points x_1..x_p and weights u the left side is

    I1 = sum_i (A u)_i^2 + 2 max_i |u_i sum_{j != i} (x_i - x_j) / |x_i - x_j|^3 u_j|

with a_ij = 1/|x_i - x_j|, and the right side is

    I2 = sum_{i != j} u_j^2 / |x_i - x_j|^2.

The same left side can be written as |AU|^2 + max_k |U^T (dA/dx_k) U|; both
routes are implemented so they can be checked against each other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pointineq.errors import InputError, NonfiniteCoordinateError, NumericalError, ZeroWeightsError
from pointineq.geometry import PointConfig, pairwise_distances

FORM_AGREEMENT_RTOL = 1e-12


@dataclass(frozen=True)
class InteractionMatrix:
    a: np.ndarray
    grad: np.ndarray  # grad[k, i, j, :] = d a_ij / d x_k


@dataclass(frozen=True)
class FormsEvaluation:
    i1: float
    i2: float
    ratio: float
    sup_index: int  # 1-based
    sup_value: float  # the full sup contribution to i1, factor 2 included
    aU: np.ndarray

    def to_dict(self) -> dict:
        return {
            "i1": self.i1,
            "i2": self.i2,
            "ratio": self.ratio,
            "sup_index": self.sup_index,
            "sup_value": self.sup_value,
            "aU": self.aU.tolist(),
        }


def interaction_matrix(config: PointConfig) -> np.ndarray:
    d = pairwise_distances(config)
    a = np.zeros_like(d)
    off = ~np.eye(config.p, dtype=bool)
    a[off] = 1.0 / d[off]
    return a


def _cubed_differences(x: np.ndarray, d: np.ndarray) -> np.ndarray:
    """c[i, j] = (x_i - x_j) / |x_i - x_j|^3, zero on the diagonal."""
    p = len(x)
    diff = x[:, None, :] - x[None, :, :]
    d3 = d**3
    d3[np.diag_indices(p)] = 1.0
    return diff / d3[:, :, None]


def interaction_gradient(config: PointConfig) -> np.ndarray:
    """Full derivative tensor g[k, i, j, :] = d a_ij / d x_k, shape (p, p, p, m).

    Only the slices k == i and k == j are non-zero:
    d a_ij / d x_i = -(x_i - x_j)/|x_i - x_j|^3 and d a_ij / d x_j is its negative.
    """
    x = config.points
    p, m = x.shape
    c = _cubed_differences(x, pairwise_distances(config))
    g = np.zeros((p, p, p, m))
    for k in range(p):
        g[k, k, :, :] = -c[k]  # d a_kj / d x_k
        g[k, :, k, :] = c[:, k]  # d a_ik / d x_k = (x_i - x_k)/|x_i - x_k|^3
    return g


def interaction(config: PointConfig) -> InteractionMatrix:
    return InteractionMatrix(interaction_matrix(config), interaction_gradient(config))


@dataclass(frozen=True)
class Quotient:
    """Ratio of ``|M z|^2 + 2 max_k |z_k (B_k^T z)|`` to ``sum_j w_j z_j^2``.

    ``mat`` is (r, n), ``weights`` is (n,), ``bilinear`` is (K, n, m) with
    K <= n: term k pairs weight z_k with the vector sum_j bilinear[k, j] z_j.
    Both I1/I2 and the augmented quotient with a point at infinity have this
    shape.  ``softmax_temperature`` replaces the max with a log-sum-exp when
    set; ``exact_value`` always uses the hard max.
    """

    mat: np.ndarray
    weights: np.ndarray
    bilinear: np.ndarray
    softmax_temperature: float | None = None

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    def parts(self, z):
        """Return (M z, h) with h[k] = z_k * (B_k^T z) of shape (K, m)."""
        mz = self.mat @ z
        g = np.einsum("kjm,j->km", self.bilinear, z)
        h = z[: len(g), None] * g
        return mz, h

    def _sup(self, hnorm):
        if self.softmax_temperature is None:
            return hnorm.max()
        t = self.softmax_temperature
        top = hnorm.max()
        return top + t * np.log(np.sum(np.exp((hnorm - top) / t)))

    def exact_value(self, z) -> float:
        z = np.asarray(z, dtype=float)
        mz, h = self.parts(z)
        den = float(self.weights @ (z * z))
        if den <= 0.0:
            raise ZeroWeightsError("weight vector is zero")
        return float(mz @ mz + 2.0 * np.sqrt(np.einsum("km,km->k", h, h)).max()) / den

    def value(self, z) -> float:
        if self.softmax_temperature is None:
            return self.exact_value(z)
        z = np.asarray(z, dtype=float)
        mz, h = self.parts(z)
        return float(mz @ mz + 2.0 * self._sup(np.linalg.norm(h, axis=1))) / float(self.weights @ (z * z))

    def values(self, zs) -> np.ndarray:
        """Exact quotient for each row of ``zs`` (shape (N, n))."""
        zs = np.asarray(zs, dtype=float)
        mz = zs @ self.mat.T
        g = np.einsum("kjm,nj->nkm", self.bilinear, zs)
        h = zs[:, : g.shape[1], None] * g
        sup = np.sqrt(np.einsum("nkm,nkm->nk", h, h)).max(axis=1)
        return (np.einsum("nr,nr->n", mz, mz) + 2.0 * sup) / ((zs * zs) @ self.weights)

    def subgradient(self, z) -> np.ndarray:
        """An element of the Clarke subdifferential of the quotient at z.

        The active term of the max is the first index attaining it; if that
        term vanishes, the zero vector is used for its contribution.
        """
        return self.value_and_subgradient(z)[1]

    def value_and_subgradient(self, z):
        """(exact_value(z), subgradient(z)) sharing one evaluation of the parts."""
        z = np.asarray(z, dtype=float)
        mz, h = self.parts(z)
        hn = np.linalg.norm(h, axis=1)
        den = float(self.weights @ (z * z))
        if den <= 0.0:
            raise ZeroWeightsError("weight vector is zero")
        mm = mz @ mz
        exact = float(mm + 2.0 * np.sqrt(np.einsum("km,km->k", h, h)).max()) / den
        num_grad = 2.0 * (self.mat.T @ mz)
        if self.softmax_temperature is None:
            active = [(int(np.argmax(hn)), 1.0)]
            sup = hn.max()
        else:
            t = self.softmax_temperature
            w = np.exp((hn - hn.max()) / t)
            w /= w.sum()
            active = list(enumerate(w))
            sup = self._sup(hn)
        for k, wk in active:
            if hn[k] == 0.0 or wk == 0.0:
                continue
            unit = h[k] / hn[k]
            gk = self.bilinear[k].T @ z
            contrib = z[k] * (self.bilinear[k] @ unit)
            contrib[k] += gk @ unit
            num_grad += 2.0 * wk * contrib
        num = float(mm + 2.0 * sup)
        den_grad = 2.0 * self.weights * z
        return exact, (num_grad - (num / den) * den_grad) / den


def ratio_quotient(config: PointConfig, softmax_temperature: float | None = None) -> Quotient:
    d = pairwise_distances(config)
    a = interaction_matrix(config)
    return Quotient(
        mat=a,
        weights=np.sum(a * a, axis=0),
        bilinear=_cubed_differences(config.points, d),
        softmax_temperature=softmax_temperature,
    )


def _weights(config: PointConfig, u) -> np.ndarray:
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.shape[0] != config.p:
        raise InputError(f"weight vector has length {u.shape[0]}, config has p={config.p}")
    if not np.all(np.isfinite(u)):
        raise NonfiniteCoordinateError("weights must be finite")
    return u


def i1_matrix_form(config: PointConfig, u) -> float:
    """|AU|^2 + max_k |U^T (dA/dx_k) U| using the full gradient tensor."""
    u = _weights(config, u)
    a = interaction_matrix(config)
    g = interaction_gradient(config)
    au = a @ u
    quad = np.einsum("i,kijm,j->km", u, g, u)
    return float(au @ au + np.linalg.norm(quad, axis=1).max())


def i1_rewrite_form(config: PointConfig, u) -> float:
    """sum_i (sum_j u_j/|x_i-x_j|)^2 + 2 max_i |u_i sum_j (x_i-x_j)/|x_i-x_j|^3 u_j|."""
    u = _weights(config, u)
    q = ratio_quotient(config)
    mz, h = q.parts(u)
    return float(mz @ mz + 2.0 * np.linalg.norm(h, axis=1).max())


def eval_forms(config: PointConfig, u, check: bool = False) -> FormsEvaluation:
    """Evaluate I1, I2 and their ratio for one (config, weights) pair.

    With ``check=True`` I1 is also assembled from the gradient tensor and the
    two values must agree to 1e-12 relative, else NumericalError.
    """
    u = _weights(config, u)
    if not np.any(u):
        raise ZeroWeightsError("weight vector is zero")
    q = ratio_quotient(config)
    au, h = q.parts(u)
    hn = 2.0 * np.linalg.norm(h, axis=1)
    k = int(np.argmax(hn))
    i1 = float(au @ au + hn[k])
    i2 = float(q.weights @ (u * u))
    if check:
        other = i1_matrix_form(config, u)
        if abs(other - i1) > FORM_AGREEMENT_RTOL * max(abs(i1), abs(other)):
            raise NumericalError(f"I1 forms disagree: {i1!r} vs {other!r}")
    return FormsEvaluation(i1=i1, i2=i2, ratio=i1 / i2, sup_index=k + 1, sup_value=float(hn[k]), aU=au)


def ratio_subgradient(config: PointConfig, u) -> np.ndarray:
    """Subgradient of u -> I1(u)/I2(u); equals the gradient where it exists."""
    u = _weights(config, u)
    if not np.any(u):
        raise ZeroWeightsError("weight vector is zero")
    return ratio_quotient(config).subgradient(u)
