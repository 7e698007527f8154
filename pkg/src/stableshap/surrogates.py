"""Taylor surrogates and their exact Shapley values.

A first- or second-order expansion of the model at the query point serves as
the control: its Shapley values have closed forms. Under marginal sampling
with a quadratic surrogate the value is a direct three-term formula. Under
Gaussian conditioning with a linear surrogate, the Shapley value reduces to
grad' D_j (x - mu) with x-independent matrices D_j built from coalition
projections; the D_j are precomputed once per covariance and reused for
every query point.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from pathlib import Path

import numpy as np

from .core import CapabilityError, Coalition, DimensionError, FeatureMoments, _frozen_array
from .values import GaussianConditioner

DJ_EXACT_MAX_D = 10


@dataclass(frozen=True)
class TaylorSurrogate:
    """Expansion of the model at center x0; acts as a Predictor itself."""

    x0: np.ndarray
    value: float
    grad: np.ndarray
    hess: np.ndarray | None = None

    def __post_init__(self):
        x0 = _frozen_array(self.x0)
        grad = _frozen_array(self.grad)
        if grad.shape != x0.shape:
            raise DimensionError("gradient length must match center")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "grad", grad)
        if self.hess is not None:
            hess = np.asarray(self.hess, dtype=float)
            if hess.shape != (x0.size, x0.size):
                raise DimensionError("hessian must be d x d")
            if np.max(np.abs(hess - hess.T)) > 1e-10:
                raise ValueError("hessian must be symmetric")
            object.__setattr__(self, "hess", _frozen_array(0.5 * (hess + hess.T)))

    @property
    def d(self) -> int:
        return self.x0.size

    @property
    def order(self) -> int:
        return 1 if self.hess is None else 2

    def predict(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        diff = points - self.x0
        out = self.value + diff @ self.grad
        if self.hess is not None:
            out = out + 0.5 * np.einsum("ij,jk,ik->i", diff, self.hess, diff)
        return out

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        if self.hess is None:
            return self.grad.copy()
        return self.grad + self.hess @ (x - self.x0)

    def hessian(self, x: np.ndarray) -> np.ndarray:
        if self.hess is None:
            return np.zeros((self.d, self.d))
        return self.hess.copy()

    @classmethod
    def from_model(cls, model, x, order: int) -> "TaylorSurrogate":
        """Expand a model at x; the model must expose the needed derivatives
        (wrap with ``with_finite_differences`` first if it does not)."""
        x = np.asarray(x, dtype=float).ravel()
        if not hasattr(model, "gradient"):
            raise CapabilityError(f"{type(model).__name__} exposes no gradient")
        f_x = float(model.predict(x[None, :])[0])
        grad = np.asarray(model.gradient(x), dtype=float)
        if order == 1:
            return cls(x0=x, value=f_x, grad=grad)
        if order == 2:
            if not hasattr(model, "hessian"):
                raise CapabilityError(f"{type(model).__name__} exposes no hessian")
            hess = np.asarray(model.hessian(x), dtype=float)
            return cls(x0=x, value=f_x, grad=grad, hess=0.5 * (hess + hess.T))
        raise ValueError("order must be 1 or 2")


def quadratic_shapley(surrogate: TaylorSurrogate, x, moments: FeatureMoments) -> np.ndarray:
    """Exact Shapley values of the quadratic surrogate under marginal sampling.

    phi_j = J_j (x_j - mu_j)
            - 1/2 [sum_k (x_k - mu_k) H_jk] (x_j - mu_j)
            - 1/2 sum_k Sigma_jk H_jk
    """
    x = np.asarray(x, dtype=float).ravel()
    if surrogate.hess is None:
        raise ValueError("quadratic_shapley needs an order-2 surrogate")
    if x.size != moments.d or surrogate.d != moments.d:
        raise DimensionError("dimension mismatch")
    if np.max(np.abs(x - surrogate.x0)) > 1e-9:
        raise ValueError("x must be the surrogate center")
    delta = x - moments.mu
    h_delta = surrogate.hess @ delta
    trace_term = np.sum(moments.sigma * surrogate.hess, axis=1)
    return surrogate.grad * delta - 0.5 * h_delta * delta - 0.5 * trace_term


@dataclass(frozen=True)
class ProjectionSet:
    """Coalition projection matrices used by the Gaussian-conditional form.

    p selects the coalition rows; q = p'p is the 0/1 diagonal; r routes the
    conditional-mean adjustment of the complement through Sigma.
    """

    indices: tuple[int, ...]
    p: np.ndarray
    q: np.ndarray
    r: np.ndarray

    def q_plus_r(self) -> np.ndarray:
        return self.q + self.r


def build_projection_set(coalition: Coalition, moments: FeatureMoments) -> ProjectionSet:
    d = moments.d
    if coalition.d != d:
        raise DimensionError("coalition dimension mismatch")
    s_idx = np.asarray(coalition.indices, dtype=int)
    p = np.zeros((s_idx.size, d))
    p[np.arange(s_idx.size), s_idx] = 1.0
    q = np.zeros((d, d))
    q[s_idx, s_idx] = 1.0
    r = np.zeros((d, d))
    if 0 < s_idx.size < d:
        cond = GaussianConditioner(moments)
        _, c_idx, w, _, _ = cond.factors(coalition.mask)
        # rows of r live on the complement, columns on the coalition
        r[np.ix_(c_idx, s_idx)] = w
    return ProjectionSet(indices=tuple(int(i) for i in s_idx), p=p, q=q, r=r)


@dataclass(frozen=True)
class DjPrecompute:
    """The x-independent matrices turning grad into Shapley values.

    When exact (full weighted-subset enumeration), sum_j D_j = I because the
    per-feature contributions telescope along every feature ordering.
    """

    matrices: np.ndarray  # (d, d, d)
    n_permutations: int | None
    exact: bool

    def __post_init__(self):
        matrices = _frozen_array(self.matrices)
        d = matrices.shape[0]
        if matrices.shape != (d, d, d):
            raise DimensionError("expected d stacked d x d matrices")
        object.__setattr__(self, "matrices", matrices)
        total = matrices.sum(axis=0)
        if np.max(np.abs(total - np.eye(d))) > 1e-10:
            raise ValueError("sum of D_j must be the identity")

    @property
    def d(self) -> int:
        return self.matrices.shape[0]


class _QPlusRCache:
    def __init__(self, moments: FeatureMoments):
        self.d = moments.d
        self.moments = moments
        self.conditioner = GaussianConditioner(moments)
        self._cache: dict[int, np.ndarray] = {}

    def get(self, bits: int) -> np.ndarray:
        hit = self._cache.get(bits)
        if hit is not None:
            return hit
        d = self.d
        mask = np.array([(bits >> i) & 1 for i in range(d)], dtype=np.int8)
        s_idx = np.flatnonzero(mask)
        qr = np.zeros((d, d))
        qr[s_idx, s_idx] = 1.0
        if 0 < s_idx.size < d:
            _, c_idx, w, _, _ = self.conditioner.factors(mask)
            qr[np.ix_(c_idx, s_idx)] = w
        self._cache[bits] = qr
        return qr


def _shapley_weights(d: int) -> np.ndarray:
    return np.array([float(Fraction(1, d * comb(d - 1, s))) for s in range(d)])


def compute_dj_exact(d: int, moments: FeatureMoments) -> DjPrecompute:
    """Exact D_j by weighted enumeration of all 2^d coalitions.

    Equivalent to averaging over all d! feature orderings, but exponentially
    cheaper: each coalition S contributes with the Shapley weight
    1 / (d * C(d-1, |S|)).
    """
    if d != moments.d:
        raise DimensionError("d does not match moments")
    if d > DJ_EXACT_MAX_D:
        raise CapabilityError(
            f"exact enumeration capped at d={DJ_EXACT_MAX_D}; use compute_dj_mc"
        )
    weights = _shapley_weights(d)
    cache = _QPlusRCache(moments)
    matrices = np.zeros((d, d, d))
    for bits in range(1 << d):
        size = bits.bit_count()
        if size == d:
            continue
        qr_s = cache.get(bits)
        w = weights[size]
        for j in range(d):
            if bits >> j & 1:
                continue
            matrices[j] += w * (cache.get(bits | (1 << j)) - qr_s)
    return DjPrecompute(matrices=matrices, n_permutations=None, exact=True)


def compute_dj_mc(d: int, moments: FeatureMoments, n_perms: int, seed: int = 0) -> DjPrecompute:
    """Unbiased Monte Carlo D_j from uniformly random feature orderings.

    Every sampled ordering updates all d matrices at once via its prefix
    chain, so sum_j D_j = I holds exactly for any sample size.
    """
    if n_perms < 1:
        raise ValueError("n_perms must be >= 1")
    if d != moments.d:
        raise DimensionError("d does not match moments")
    rng = np.random.default_rng(seed)
    cache = _QPlusRCache(moments)
    matrices = np.zeros((d, d, d))
    for _ in range(n_perms):
        perm = rng.permutation(d)
        bits = 0
        prev = cache.get(0)
        for j in perm:
            bits |= 1 << int(j)
            cur = cache.get(bits)
            matrices[j] += cur - prev
            prev = cur
    matrices /= n_perms
    return DjPrecompute(matrices=matrices, n_permutations=n_perms, exact=False)


def default_dj_permutations(d: int) -> int:
    """Monte Carlo budget making D_j noise negligible next to coalition noise."""
    return 10 * d * d


def linear_shapley(
    surrogate: TaylorSurrogate, x, dj: DjPrecompute, moments: FeatureMoments
) -> np.ndarray:
    """Shapley values of the linear surrogate under Gaussian conditioning:
    phi_j = grad' D_j (x - mu)."""
    x = np.asarray(x, dtype=float).ravel()
    if surrogate.d != dj.d or x.size != dj.d or moments.d != dj.d:
        raise DimensionError("dimension mismatch")
    delta = x - moments.mu
    return np.einsum("j,kji,i->k", surrogate.grad, dj.matrices, delta)


# ---------------------------------------------------------------------------
# Precompute cache: repeated runs over the same covariance skip the work.
# ---------------------------------------------------------------------------


def dj_cache_key(
    d: int, moments: FeatureMoments, n_perms: int | None, seed: int | None
) -> str:
    digest = hashlib.sha256()
    digest.update(str(d).encode())
    digest.update(np.ascontiguousarray(moments.mu).tobytes())
    digest.update(np.ascontiguousarray(moments.sigma).tobytes())
    digest.update(str(n_perms).encode())
    digest.update(str(seed).encode())
    return digest.hexdigest()


def save_dj(dj: DjPrecompute, path: str | Path, key: str):
    payload = {
        "key": key,
        "exact": dj.exact,
        "n_permutations": dj.n_permutations,
        "matrices": dj.matrices.tolist(),
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True))


def load_dj(path: str | Path, key: str | None = None) -> DjPrecompute:
    payload = json.loads(Path(path).read_text())
    if key is not None and payload.get("key") != key:
        raise ValueError("D_j cache key mismatch; recompute with current moments")
    return DjPrecompute(
        matrices=np.array(payload["matrices"]),
        n_permutations=payload["n_permutations"],
        exact=payload["exact"],
    )


def ensure_dj(
    moments: FeatureMoments,
    cache_path: str | Path | None = None,
    n_perms: int | None = None,
    seed: int = 0,
) -> DjPrecompute:
    """Load a cached D_j precompute if the key matches, else build and cache.

    Exact enumeration is used whenever feasible (d <= 10); otherwise Monte
    Carlo with ``n_perms`` orderings (default 10 d^2).
    """
    d = moments.d
    use_exact = d <= DJ_EXACT_MAX_D and n_perms is None
    if not use_exact and n_perms is None:
        n_perms = default_dj_permutations(d)
    key = dj_cache_key(d, moments, None if use_exact else n_perms, None if use_exact else seed)
    if cache_path is not None and Path(cache_path).exists():
        try:
            return load_dj(cache_path, key)
        except ValueError:
            pass
    dj = compute_dj_exact(d, moments) if use_exact else compute_dj_mc(d, moments, n_perms, seed)
    if cache_path is not None:
        save_dj(dj, cache_path, key)
    return dj
