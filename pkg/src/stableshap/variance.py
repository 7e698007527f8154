"""Variance and covariance of the two Shapley estimator streams.

The control-variate coefficient needs, per feature, the Monte Carlo variance
of each stream and the covariance between them. Shapley sampling admits the
direct empirical formula Var(mean of increments) = Var(G)/M. For KernelSHAP
three routes are implemented: bootstrap over coalitions, propagation of the
per-coalition value noise through the least-squares map A(Z), and the
split-into-groups method. Bootstrap and least squares agree closely in
practice; the grouped method is retained for comparison but its estimates are
heavy-tailed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    ConfigurationError,
    DegenerateDesignError,
    DimensionError,
    InsufficientDataError,
    _frozen_array,
)
from .estimators import KernelDraws, kernelshap_solve

SS_EMPIRICAL = "ss_empirical"
KS_BOOTSTRAP = "ks_bootstrap"
KS_LEAST_SQUARES = "ks_least_squares"
KS_GROUPED = "ks_grouped"


@dataclass(frozen=True)
class IncrementRecord:
    """Per-ordering paired increments G = v(S u j) - v(S) for one feature."""

    g_model: np.ndarray
    g_approx: np.ndarray

    def __post_init__(self):
        gm = _frozen_array(self.g_model)
        ga = _frozen_array(self.g_approx)
        if gm.shape != ga.shape or gm.ndim != 1:
            raise DimensionError("increment vectors must be 1-D of equal length")
        if not (np.all(np.isfinite(gm)) and np.all(np.isfinite(ga))):
            raise ValueError("increments must be finite")
        object.__setattr__(self, "g_model", gm)
        object.__setattr__(self, "g_approx", ga)

    def __len__(self) -> int:
        return self.g_model.size


@dataclass(frozen=True)
class CovEstimate:
    """Scalar (var_model, var_approx, cov) triple for one feature."""

    var_model: float
    var_approx: float
    cov: float
    method: str

    def __post_init__(self):
        if self.var_model < 0 or self.var_approx < 0:
            raise ValueError("variances must be nonnegative")
        bound = np.sqrt(self.var_model * self.var_approx) * (1.0 + 1e-9) + 1e-300
        if abs(self.cov) > bound:
            raise ValueError("covariance violates the Cauchy-Schwarz bound")

    @property
    def degenerate(self) -> bool:
        return self.var_model <= 0.0 or self.var_approx <= 0.0


def _paired_moments(a: np.ndarray, b: np.ndarray) -> tuple[float, float, float]:
    n = a.size
    am, bm = a.mean(), b.mean()
    da, db = a - am, b - bm
    var_a = float(da @ da / (n - 1))
    var_b = float(db @ db / (n - 1))
    cov = float(da @ db / (n - 1))
    return var_a, var_b, cov


def ss_cov(record: IncrementRecord) -> CovEstimate:
    """Shapley-sampling variance/covariance: sample moments of G over M draws,
    divided by M (the estimate is a plain mean of i.i.d. increments)."""
    m = len(record)
    if m < 2:
        raise InsufficientDataError("need at least 2 increments")
    var_m, var_a, cov = _paired_moments(record.g_model, record.g_approx)
    return CovEstimate(
        var_model=var_m / m, var_approx=var_a / m, cov=cov / m, method=SS_EMPIRICAL
    )


def ss_cov_all(g_model: np.ndarray, g_approx: np.ndarray) -> list[CovEstimate]:
    """Per-feature ``ss_cov`` over (M, d) increment matrices."""
    if g_model.shape != g_approx.shape or g_model.ndim != 2:
        raise DimensionError("expected matching (M, d) matrices")
    m = g_model.shape[0]
    if m < 2:
        raise InsufficientDataError("need at least 2 increments")
    dm = g_model - g_model.mean(axis=0)
    da = g_approx - g_approx.mean(axis=0)
    var_m = (dm * dm).sum(axis=0) / (m - 1) / m
    var_a = (da * da).sum(axis=0) / (m - 1) / m
    cov = (dm * da).sum(axis=0) / (m - 1) / m
    return [
        CovEstimate(var_model=float(vm), var_approx=float(va), cov=float(c), method=SS_EMPIRICAL)
        for vm, va, c in zip(var_m, var_a, cov)
    ]


def ks_least_squares_cov(draws: KernelDraws, projection: np.ndarray) -> list[CovEstimate]:
    """Propagate per-coalition value noise through the least-squares map.

    Var(v) and the model/approx value covariance are diagonal by construction
    (completion draws are independent across coalitions), estimated from the
    shared per-coalition samples as sample moments of the mean. The resulting
    per-feature variances are diag(A Var(v) A') and diag(A Cov A').
    """
    ns = draws.per_sample_model.shape[1]
    if ns < 2:
        raise InsufficientDataError("least-squares variance needs >= 2 samples per coalition")
    pm, pa = draws.per_sample_model, draws.per_sample_approx
    dm = pm - pm.mean(axis=1, keepdims=True)
    da = pa - pa.mean(axis=1, keepdims=True)
    var_vm = (dm * dm).sum(axis=1) / (ns - 1) / ns
    var_va = (da * da).sum(axis=1) / (ns - 1) / ns
    cov_v = (dm * da).sum(axis=1) / (ns - 1) / ns
    a_sq = projection**2
    var_m = a_sq @ var_vm
    var_a = a_sq @ var_va
    cov = a_sq @ cov_v
    return [
        CovEstimate(
            var_model=float(vm), var_approx=float(va), cov=float(c), method=KS_LEAST_SQUARES
        )
        for vm, va, c in zip(var_m, var_a, cov)
    ]


def ks_bootstrap_cov(
    draws: KernelDraws,
    v_empty_model: float,
    v_empty_approx: float,
    v_full_model: float,
    v_full_approx: float,
    n_boot: int = 200,
    seed: int = 0,
    max_retries: int = 10,
) -> list[CovEstimate]:
    """Bootstrap over coalitions: resample the M (S, v) pairs with replacement,
    re-solve both streams on each resample, and take empirical moments of the
    replicate attributions. Both streams share each resample so the covariance
    is estimable."""
    if n_boot < 2:
        raise InsufficientDataError("need at least 2 bootstrap replicates")
    m, d = draws.z.shape
    rng = np.random.default_rng(seed)
    phi_m = np.empty((n_boot, d))
    phi_a = np.empty((n_boot, d))
    for b in range(n_boot):
        for attempt in range(max_retries + 1):
            idx = rng.integers(0, m, size=m)
            try:
                phi_m[b] = kernelshap_solve(
                    draws.z[idx], draws.v_model[idx], v_empty_model, v_full_model
                )
                phi_a[b] = kernelshap_solve(
                    draws.z[idx], draws.v_approx[idx], v_empty_approx, v_full_approx
                )
                break
            except DegenerateDesignError:
                if attempt == max_retries:
                    raise
    out = []
    for j in range(d):
        var_m, var_a, cov = _paired_moments(phi_m[:, j], phi_a[:, j])
        out.append(
            CovEstimate(var_model=var_m, var_approx=var_a, cov=cov, method=KS_BOOTSTRAP)
        )
    return out


def ks_grouped_cov(
    draws: KernelDraws,
    n_groups: int,
    v_empty_model: float,
    v_empty_approx: float,
    v_full_model: float,
    v_full_approx: float,
) -> list[CovEstimate]:
    """Split the draws into K disjoint groups, solve each, and scale the
    between-group moments by 1/K (each group is an independent estimate built
    from M/K coalitions, so its variance is K times that of the full solve)."""
    m, d = draws.z.shape
    if n_groups < 2:
        raise ConfigurationError("need at least 2 groups")
    if m // n_groups < d + 2:
        raise ConfigurationError(
            f"groups of {m // n_groups} coalitions are too small; need >= {d + 2}"
        )
    phi_m = np.empty((n_groups, d))
    phi_a = np.empty((n_groups, d))
    for k, idx in enumerate(np.array_split(np.arange(m), n_groups)):
        phi_m[k] = kernelshap_solve(draws.z[idx], draws.v_model[idx], v_empty_model, v_full_model)
        phi_a[k] = kernelshap_solve(
            draws.z[idx], draws.v_approx[idx], v_empty_approx, v_full_approx
        )
    out = []
    for j in range(d):
        var_m, var_a, cov = _paired_moments(phi_m[:, j], phi_a[:, j])
        out.append(
            CovEstimate(
                var_model=var_m / n_groups,
                var_approx=var_a / n_groups,
                cov=cov / n_groups,
                method=KS_GROUPED,
            )
        )
    return out
