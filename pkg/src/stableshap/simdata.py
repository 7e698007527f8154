"""Synthetic benchmark data: ten Gaussian features with block covariance.

Features are unit-variance, mean zero. They are linked in a chain of
alternating correlations: pairs (0,1), (2,3), ... at 0.5 and the connecting
links (1,2), (3,4), ... at 0.25. Binary responses come from a logistic
regression with seeded coefficients; that generating model doubles as the
ground-truth predictor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, child_seed
from .models import LogisticRegressionModel, _sigmoid

SIM_D = 10
PAIR_CORRELATION = 0.5
LINK_CORRELATION = 0.25


def block_covariance(d: int = SIM_D) -> np.ndarray:
    """The alternating-chain covariance with unit diagonals."""
    sigma = np.eye(d)
    for i in range(0, d - 1, 2):
        sigma[i, i + 1] = sigma[i + 1, i] = PAIR_CORRELATION
    for i in range(1, d - 1, 2):
        sigma[i, i + 1] = sigma[i + 1, i] = LINK_CORRELATION
    return sigma


@dataclass(frozen=True)
class SimulatedData:
    dataset: Dataset
    labels: np.ndarray
    model: LogisticRegressionModel


def generate_sim_dataset(n: int, seed: int = 0, coef_scale: float = 0.6) -> SimulatedData:
    """Draw n rows, binary labels, and the generating logistic model.

    Distinct sub-seeds feed the rows, the coefficients, and the label flips,
    so e.g. the coefficients do not change when n does. The default
    coefficient scale keeps the logits mostly within +-2 standard deviations,
    a moderately saturated regime where the Taylor controls are informative
    but not trivially perfect.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    d = SIM_D
    sigma = block_covariance(d)
    chol = np.linalg.cholesky(sigma)
    rows_rng = np.random.default_rng(child_seed(seed, 0))
    rows = rows_rng.standard_normal((n, d)) @ chol.T
    coef_rng = np.random.default_rng(child_seed(seed, 1))
    weights = coef_rng.normal(0.0, coef_scale, size=d)
    model = LogisticRegressionModel(weights=weights, bias=0.0)
    label_rng = np.random.default_rng(child_seed(seed, 2))
    probs = _sigmoid(rows @ weights)
    labels = (label_rng.random(n) < probs).astype(float)
    dataset = Dataset(rows=rows, feature_names=tuple(f"x{i}" for i in range(d)))
    return SimulatedData(dataset=dataset, labels=labels, model=model)
