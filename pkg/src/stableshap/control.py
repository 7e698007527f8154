"""The control-variate correction of Shapley estimates.

Given a noisy model-stream estimate, a correlated surrogate-stream estimate,
and the surrogate's exact Shapley value, subtract alpha times the surrogate's
known error. With alpha = Cov/Var the corrected estimator attains the minimal
variance (1 - rho^2) Var(model stream); for any fixed alpha the correction
leaves the expectation unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import DimensionError, ShapleyEstimate, _frozen_array
from .variance import CovEstimate

ALPHA_GUARD = 1e-12


@dataclass(frozen=True)
class ControlledEstimate:
    """Corrected attributions plus the coefficients and anticipated gains."""

    phi_cv: np.ndarray
    alpha: np.ndarray
    anticipated_rho2: np.ndarray
    raw_model: ShapleyEstimate
    raw_approx: ShapleyEstimate
    exact_approx: np.ndarray

    def __post_init__(self):
        for name in ("phi_cv", "alpha", "anticipated_rho2", "exact_approx"):
            arr = _frozen_array(getattr(self, name))
            if arr.shape != (self.raw_model.d,):
                raise DimensionError(f"{name} must be a length-d vector")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
            object.__setattr__(self, name, arr)
        if np.any(self.anticipated_rho2 < 0) or np.any(self.anticipated_rho2 > 1):
            raise ValueError("anticipated_rho2 must lie in [0, 1]")


def anticipated_reduction(cov: CovEstimate) -> float:
    """Plug-in estimate of the variance-reduction factor rho^2, clipped to
    [0, 1]; returns 0 for degenerate (zero-variance) inputs."""
    if cov.degenerate:
        return 0.0
    rho2 = cov.cov**2 / (cov.var_model * cov.var_approx)
    return float(np.clip(rho2, 0.0, 1.0))


def combine(
    model_est: ShapleyEstimate,
    approx_est: ShapleyEstimate,
    exact_approx: np.ndarray,
    covs: Sequence[CovEstimate],
) -> ControlledEstimate:
    """Apply the per-feature correction phi_model - alpha (phi_approx - exact).

    alpha = cov / var_approx, except when var_approx is (numerically) zero, in
    which case the correction is skipped for that feature and the raw model
    estimate passes through. alpha itself is not clipped: the optimal
    coefficient can legitimately exceed 1.
    """
    exact_approx = np.asarray(exact_approx, dtype=float).ravel()
    d = model_est.d
    if approx_est.d != d or exact_approx.size != d or len(covs) != d:
        raise DimensionError("inputs disagree on the number of features")
    alpha = np.zeros(d)
    phi_cv = np.empty(d)
    rho2 = np.empty(d)
    for j, cov in enumerate(covs):
        guard = ALPHA_GUARD * max(1.0, cov.var_model)
        if cov.var_approx > guard:
            alpha[j] = cov.cov / cov.var_approx
            phi_cv[j] = model_est.values[j] - alpha[j] * (
                approx_est.values[j] - exact_approx[j]
            )
        else:
            alpha[j] = 0.0
            phi_cv[j] = model_est.values[j]
        rho2[j] = anticipated_reduction(cov)
    return ControlledEstimate(
        phi_cv=phi_cv,
        alpha=alpha,
        anticipated_rho2=rho2,
        raw_model=model_est,
        raw_approx=approx_est,
        exact_approx=exact_approx,
    )
