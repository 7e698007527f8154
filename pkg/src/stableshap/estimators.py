"""Monte Carlo Shapley estimators over paired value functions.

Shapley sampling averages value increments along random feature orderings;
KernelSHAP solves a constrained weighted least squares over sampled
coalitions. Both run the model stream and the surrogate stream on one shared
coalition (and completion-sample) stream, which is what makes the
control-variate correction effective.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    Coalition,
    ConfigurationError,
    DegenerateDesignError,
    DimensionError,
    ShapleyEstimate,
    _frozen_array,
)
from .values import MonteCarloPairedValues, ValueFunctionConfig

KS_CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class PermutationDraw:
    """One ordering draw for a target feature: the strict predecessors of j."""

    permutation: tuple[int, ...]
    target: int

    @property
    def pre_target(self) -> tuple[int, ...]:
        pos = self.permutation.index(self.target)
        return tuple(sorted(self.permutation[:pos]))

    def coalition(self) -> Coalition:
        return Coalition.from_indices(self.pre_target, len(self.permutation))


@dataclass(frozen=True)
class KernelDraws:
    """Batch of sampled coalitions with paired values and per-sample records."""

    z: np.ndarray  # (M, d) binary
    v_model: np.ndarray  # (M,)
    v_approx: np.ndarray  # (M,)
    per_sample_model: np.ndarray  # (M, ns)
    per_sample_approx: np.ndarray  # (M, ns)

    def __post_init__(self):
        z = _frozen_array(self.z, dtype=np.int8)
        sizes = z.sum(axis=1)
        if z.size and (sizes.min() < 1 or sizes.max() > z.shape[1] - 1):
            raise ValueError("coalitions must satisfy 1 <= |S| <= d-1")
        object.__setattr__(self, "z", z)
        for name in ("v_model", "v_approx", "per_sample_model", "per_sample_approx"):
            object.__setattr__(self, name, _frozen_array(getattr(self, name)))

    def __len__(self) -> int:
        return self.z.shape[0]

    def subset(self, idx) -> "KernelDraws":
        return KernelDraws(
            z=self.z[idx],
            v_model=self.v_model[idx],
            v_approx=self.v_approx[idx],
            per_sample_model=self.per_sample_model[idx],
            per_sample_approx=self.per_sample_approx[idx],
        )


@dataclass(frozen=True)
class ShapleySamplingResult:
    """Estimates for all features plus the raw per-draw increments."""

    estimate_model: ShapleyEstimate
    estimate_approx: ShapleyEstimate
    g_model: np.ndarray  # (M, d)
    g_approx: np.ndarray  # (M, d)


@dataclass(frozen=True)
class KernelShapResult:
    estimate_model: ShapleyEstimate
    estimate_approx: ShapleyEstimate
    draws: KernelDraws
    projection: np.ndarray  # A(Z), (d, M)
    v_empty_model: float
    v_empty_approx: float
    v_full_model: float
    v_full_approx: float


def _coalition_size_distribution(d: int) -> np.ndarray:
    weights = np.array([(d - 1) / (k * (d - k)) for k in range(1, d)])
    return weights / weights.sum()


def _sample_coalition_masks(d: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """Two-stage draw: size k with prob proportional to (d-1)/(k(d-k)), then a
    uniform k-subset. The subset-count factor cancels, reproducing the kernel
    distribution over coalitions."""
    if d < 2:
        raise ConfigurationError("coalition sampling needs d >= 2")
    probs = _coalition_size_distribution(d)
    sizes = rng.choice(np.arange(1, d), size=m, p=probs)
    masks = np.zeros((m, d), dtype=np.int8)
    scores = rng.random((m, d))
    order = np.argsort(scores, axis=1)
    for k in range(1, d):
        rows = np.flatnonzero(sizes == k)
        if rows.size:
            cols = order[rows, :k]
            masks[rows[:, None], cols] = 1
    return masks


def kernel_sample_coalitions(d: int, m: int, seed: int = 0) -> list[Coalition]:
    """M i.i.d. coalitions from the KernelSHAP weighting distribution."""
    rng = np.random.default_rng(seed)
    return [Coalition(mask=row) for row in _sample_coalition_masks(d, m, rng)]


def _prefix_masks(perms: np.ndarray) -> np.ndarray:
    """Prefix coalitions of each ordering: (M, d, d) with entry [m, k] the
    mask of the first k features of ordering m."""
    m, d = perms.shape
    masks = np.zeros((m, d, d), dtype=np.int8)
    rows = np.arange(m)
    for k in range(1, d):
        masks[:, k, :] = masks[:, k - 1, :]
        masks[rows, k, perms[:, k - 1]] = 1
    return masks


def shapley_sampling_all(values, m: int, seed: int = 0) -> ShapleySamplingResult:
    """Shapley sampling for every feature, reusing each ordering across all d.

    Each ordering contributes one increment per feature (its prefix jump), so
    per feature the g-draws are i.i.d. across orderings. Returns the raw
    increment matrices for the variance estimators.
    """
    if m < 2:
        raise ConfigurationError("need at least 2 orderings")
    d = values.d
    rng = np.random.default_rng(seed)
    perms = rng.permuted(np.tile(np.arange(d), (m, 1)), axis=1)
    masks = _prefix_masks(perms).reshape(m * d, d)
    batch = values.values_batch(masks, seed=rng.integers(2**63))
    vf_model, vf_approx = values.values_full()
    vm = np.concatenate([batch.v_model.reshape(m, d), np.full((m, 1), vf_model)], axis=1)
    va = np.concatenate([batch.v_approx.reshape(m, d), np.full((m, 1), vf_approx)], axis=1)
    inc_m = np.diff(vm, axis=1)
    inc_a = np.diff(va, axis=1)
    g_model = np.empty((m, d))
    g_approx = np.empty((m, d))
    rows = np.arange(m)[:, None]
    g_model[rows, perms] = inc_m
    g_approx[rows, perms] = inc_a
    return ShapleySamplingResult(
        estimate_model=ShapleyEstimate(values=g_model.mean(axis=0), n_coalitions=m),
        estimate_approx=ShapleyEstimate(values=g_approx.mean(axis=0), n_coalitions=m),
        g_model=g_model,
        g_approx=g_approx,
    )


def shapley_sampling(
    model,
    surrogate,
    x,
    j: int,
    m: int,
    config: ValueFunctionConfig,
    moments=None,
    background=None,
    seed: int | None = None,
):
    """Single-feature Shapley sampling (the textbook form of the estimator).

    Returns per-stream estimates for feature j and the raw paired increment
    vectors. The experiment driver uses ``shapley_sampling_all`` instead,
    which shares each ordering across features.
    """
    if m < 2:
        raise ConfigurationError("need at least 2 orderings")
    values = MonteCarloPairedValues(model, surrogate, x, config, moments, background)
    d = values.d
    if not 0 <= j < d:
        raise DimensionError(f"feature {j} out of range")
    rng = np.random.default_rng(config.seed if seed is None else seed)
    perms = rng.permuted(np.tile(np.arange(d), (m, 1)), axis=1)
    pos = np.argmax(perms == j, axis=1)
    pre = np.zeros((m, d), dtype=np.int8)
    for row in range(m):
        pre[row, perms[row, : pos[row]]] = 1
    with_j = pre.copy()
    with_j[:, j] = 1
    batch = values.values_batch(np.vstack([pre, with_j]), seed=rng.integers(2**63))
    g_model = batch.v_model[m:] - batch.v_model[:m]
    g_approx = batch.v_approx[m:] - batch.v_approx[:m]
    est_m = ShapleyEstimate(values=np.array([g_model.mean()]), n_coalitions=m)
    est_a = ShapleyEstimate(values=np.array([g_approx.mean()]), n_coalitions=m)
    return (est_m, est_a), (g_model, g_approx)


def _check_coverage(z: np.ndarray):
    m, d = z.shape
    appears = z.sum(axis=0)
    if np.any(appears == 0) or np.any(appears == m):
        raise DegenerateDesignError(
            "every feature must appear and be absent at least once; resample or increase M"
        )


def kernelshap_solve(
    z: np.ndarray, v: np.ndarray, v_empty: float, v_full: float
) -> np.ndarray:
    """Closed-form constrained least squares for the KernelSHAP estimate.

    Minimizes sum_m (phi' z_m - (v_m - v_empty))^2 subject to
    sum(phi) = v_full - v_empty. The constraint is enforced algebraically, so
    the returned attributions satisfy it to machine precision.
    """
    z = np.asarray(z, dtype=float)
    v = np.asarray(v, dtype=float).ravel()
    if z.ndim != 2 or v.size != z.shape[0]:
        raise DimensionError("Z must be (M, d) and V length M")
    _check_coverage(z)
    gram = z.T @ z
    if np.linalg.cond(gram) > KS_CONDITION_LIMIT:
        raise DegenerateDesignError("Z'Z is singular; resample or increase M")
    ones = np.ones(z.shape[1])
    u = np.linalg.solve(gram, z.T @ (v - v_empty))
    w = np.linalg.solve(gram, ones)
    delta = v_full - v_empty
    return u - w * ((ones @ u - delta) / (ones @ w))


def kernelshap_projection(z: np.ndarray) -> np.ndarray:
    """The linear map A(Z) sending centered values to unconstrained-direction
    attributions; reused by the least-squares variance propagation."""
    z = np.asarray(z, dtype=float)
    gram = z.T @ z
    if np.linalg.cond(gram) > KS_CONDITION_LIMIT:
        raise DegenerateDesignError("Z'Z is singular; resample or increase M")
    ones = np.ones(z.shape[1])
    w1 = np.linalg.solve(gram, z.T)
    w = np.linalg.solve(gram, ones)
    return w1 - np.outer(w, ones @ w1) / (ones @ w)


def kernelshap_values(values, m: int, seed: int = 0) -> KernelShapResult:
    """KernelSHAP on a paired value function: one coalition stream, two solves."""
    d = values.d
    if m < d + 2:
        raise ConfigurationError("need M >= d + 2 coalitions")
    rng = np.random.default_rng(seed)
    masks = _sample_coalition_masks(d, m, rng)
    batch = values.values_batch(masks, seed=rng.integers(2**63))
    # the anchors enter the constraint of every solve as constants, so they
    # are evaluated once with high precision rather than with ns samples
    v_empty_model, v_empty_approx = values.values_empty_anchor(seed=rng.integers(2**63))
    v_full_model, v_full_approx = values.values_full()
    phi_model = kernelshap_solve(masks, batch.v_model, v_empty_model, v_full_model)
    phi_approx = kernelshap_solve(masks, batch.v_approx, v_empty_approx, v_full_approx)
    draws = KernelDraws(
        z=masks,
        v_model=batch.v_model,
        v_approx=batch.v_approx,
        per_sample_model=batch.per_sample_model,
        per_sample_approx=batch.per_sample_approx,
    )
    return KernelShapResult(
        estimate_model=ShapleyEstimate(values=phi_model, n_coalitions=m),
        estimate_approx=ShapleyEstimate(values=phi_approx, n_coalitions=m),
        draws=draws,
        projection=kernelshap_projection(masks),
        v_empty_model=v_empty_model,
        v_empty_approx=v_empty_approx,
        v_full_model=v_full_model,
        v_full_approx=v_full_approx,
    )


def kernelshap(
    model,
    surrogate,
    x,
    m: int,
    config: ValueFunctionConfig,
    moments=None,
    background=None,
    seed: int | None = None,
) -> KernelShapResult:
    """KernelSHAP for a black-box model and its Taylor surrogate at x."""
    values = MonteCarloPairedValues(model, surrogate, x, config, moments, background)
    return kernelshap_values(values, m, seed=config.seed if seed is None else seed)


def coalition_size_pmf(d: int) -> np.ndarray:
    """Normalized coalition-size distribution implied by the kernel weights
    (sizes 1..d-1); exposed for tests and diagnostics."""
    return _coalition_size_distribution(d)
