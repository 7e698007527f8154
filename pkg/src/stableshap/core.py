"""Shared domain types: datasets, feature moments, coalitions, estimates.

Everything here is immutable after construction, so instances can be shared
freely across threads and reused between estimator runs.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence, runtime_checkable

import numpy as np


class DimensionError(ValueError):
    """Array shapes do not line up with the declared feature dimension."""


class InvalidGroupingError(ValueError):
    """Categorical column groups overlap or reference bad indices."""


class CapabilityError(RuntimeError):
    """A model was asked for an operation it does not support."""


class ConfigurationError(ValueError):
    """A configuration value is out of its admissible range."""


class DegenerateDesignError(RuntimeError):
    """A sampled coalition design is singular; resample or increase M."""


class InsufficientDataError(ValueError):
    """Not enough draws/samples to form the requested estimate."""


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@runtime_checkable
class Predictor(Protocol):
    """Black-box model contract.

    ``predict`` maps a batch of points (n, d) to a length-n vector and must be
    deterministic. Models may additionally expose ``gradient(x)`` and
    ``hessian(x)``; capability is discovered with ``hasattr``.
    """

    def predict(self, points: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class Dataset:
    """Background data: an (n, d) matrix plus feature names and one-hot groups.

    ``categorical_groups`` lists disjoint column-index tuples; each tuple is
    the one-hot block of one original categorical feature and every row must
    activate exactly one column of each block.
    """

    rows: np.ndarray
    feature_names: tuple[str, ...]
    categorical_groups: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self):
        rows = _frozen_array(self.rows)
        if rows.ndim != 2:
            raise DimensionError("rows must be a 2-D matrix")
        n, d = rows.shape
        if n < 2 or d < 1:
            raise DimensionError(f"need n >= 2 and d >= 1, got shape {rows.shape}")
        if not np.all(np.isfinite(rows)):
            raise ValueError("rows contain non-finite values")
        names = tuple(str(s) for s in self.feature_names)
        if len(names) != d:
            raise DimensionError("feature_names length must match column count")
        groups = tuple(tuple(int(i) for i in g) for g in self.categorical_groups)
        seen: set[int] = set()
        for g in groups:
            for i in g:
                if not 0 <= i < d:
                    raise InvalidGroupingError(f"column index {i} out of range")
                if i in seen:
                    raise InvalidGroupingError(f"column {i} appears in two groups")
                seen.add(i)
            block = rows[:, list(g)]
            if not (np.all(np.isin(block, (0.0, 1.0))) and np.all(block.sum(axis=1) == 1.0)):
                raise InvalidGroupingError(f"columns {g} are not a valid one-hot block")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "categorical_groups", groups)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    @classmethod
    def from_csv(cls, path: str | Path, groups_path: str | Path | None = None) -> "Dataset":
        """Load from a CSV with a header row and all-numeric body.

        ``groups_path`` optionally points at a sidecar JSON of the form
        ``{"groups": [[col, col, ...], ...]}`` with zero-based column indices.
        """
        path = Path(path)
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            body = [[float(cell) for cell in row] for row in reader if row]
        groups: tuple[tuple[int, ...], ...] = ()
        if groups_path is not None:
            spec = json.loads(Path(groups_path).read_text())
            groups = tuple(tuple(int(i) for i in g) for g in spec.get("groups", []))
        return cls(rows=np.array(body), feature_names=tuple(header), categorical_groups=groups)


@dataclass(frozen=True)
class FeatureMoments:
    """First and second moments of the features: mean vector and covariance."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = _frozen_array(self.mu)
        sigma = _frozen_array(self.sigma)
        if mu.ndim != 1 or sigma.shape != (mu.size, mu.size):
            raise DimensionError("mu must be length d and sigma d x d")
        if np.max(np.abs(sigma - sigma.T)) > 1e-12:
            raise ValueError("sigma is not symmetric within 1e-12")
        if np.min(np.linalg.eigvalsh(sigma)) < -1e-10:
            raise ValueError("sigma has an eigenvalue below -1e-10; not PSD")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def d(self) -> int:
        return self.mu.size

    @classmethod
    def from_dataset(cls, dataset: Dataset) -> "FeatureMoments":
        """Empirical moments: sample mean and sample covariance (ddof=1)."""
        mu = dataset.rows.mean(axis=0)
        sigma = np.cov(dataset.rows, rowvar=False, ddof=1)
        sigma = np.atleast_2d(sigma)
        sigma = 0.5 * (sigma + sigma.T)
        return cls(mu=mu, sigma=sigma)


@dataclass(frozen=True)
class Coalition:
    """A subset S of features, kept in sync with its binary mask z."""

    mask: np.ndarray
    indices: tuple[int, ...] = field(default=())

    def __post_init__(self):
        mask = _frozen_array(self.mask, dtype=np.int8)
        if mask.ndim != 1:
            raise DimensionError("mask must be a 1-D binary vector")
        if not np.all(np.isin(mask, (0, 1))):
            raise ValueError("mask entries must be 0 or 1")
        indices = tuple(int(i) for i in np.flatnonzero(mask))
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "indices", indices)

    @property
    def d(self) -> int:
        return self.mask.size

    @property
    def size(self) -> int:
        return len(self.indices)

    @property
    def complement(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.mask == 0))

    @classmethod
    def from_indices(cls, indices: Sequence[int], d: int) -> "Coalition":
        mask = np.zeros(d, dtype=np.int8)
        for i in indices:
            if not 0 <= i < d:
                raise DimensionError(f"index {i} out of range for d={d}")
            mask[i] = 1
        return cls(mask=mask)


def coalition_from_mask(mask) -> Coalition:
    """Bridge from a binary vector z to the set representation S."""
    return Coalition(mask=np.asarray(mask))


def aggregate_categorical(values: np.ndarray, groups: Sequence[Sequence[int]]) -> np.ndarray:
    """Sum per-column attributions of each one-hot block into one entry.

    Ungrouped columns pass through unchanged; output keeps original feature
    order (each block sits at the position of its first column).
    """
    values = np.asarray(values, dtype=float)
    d = values.size
    seen: set[int] = set()
    norm_groups = []
    for g in groups:
        g = tuple(int(i) for i in g)
        for i in g:
            if not 0 <= i < d:
                raise InvalidGroupingError(f"column index {i} out of range")
            if i in seen:
                raise InvalidGroupingError(f"column {i} appears in two groups")
            seen.add(i)
        norm_groups.append(g)
    units: list[tuple[int, list[int]]] = [(min(g), list(g)) for g in norm_groups]
    units += [(i, [i]) for i in range(d) if i not in seen]
    units.sort(key=lambda u: u[0])
    return np.array([values[cols].sum() for _, cols in units])


@dataclass(frozen=True)
class ShapleyEstimate:
    """Per-feature Shapley estimates with optional uncertainty information.

    ``variances`` holds the estimated Monte Carlo variance of each entry of
    ``values``; ``model_approx_covariances`` the estimated covariance between
    the model-stream and surrogate-stream estimators for the same feature.
    """

    values: np.ndarray
    n_coalitions: int
    variances: np.ndarray | None = None
    model_approx_covariances: np.ndarray | None = None
    approx_variances: np.ndarray | None = None

    def __post_init__(self):
        values = _frozen_array(self.values)
        if values.ndim != 1:
            raise DimensionError("values must be a vector")
        object.__setattr__(self, "values", values)
        for name in ("variances", "model_approx_covariances", "approx_variances"):
            arr = getattr(self, name)
            if arr is None:
                continue
            arr = _frozen_array(arr)
            if arr.shape != values.shape:
                raise DimensionError(f"{name} must match values in length")
            object.__setattr__(self, name, arr)
        if self.variances is not None and np.any(self.variances < 0):
            raise ValueError("variances must be nonnegative")
        if (
            self.model_approx_covariances is not None
            and self.variances is not None
            and self.approx_variances is not None
        ):
            bound = np.sqrt(self.variances * self.approx_variances) + 1e-12
            if np.any(np.abs(self.model_approx_covariances) > bound):
                raise ValueError("covariance violates the Cauchy-Schwarz bound")

    @property
    def d(self) -> int:
        return self.values.size


def child_seed(*path: int) -> np.random.SeedSequence:
    """Deterministic seed derivation for nested experiment structure.

    Identical paths always yield identical streams, so any part of a run can
    be recomputed in isolation or in parallel without changing results.
    """
    return np.random.SeedSequence(tuple(int(p) for p in path))


def rng_from(*path: int) -> np.random.Generator:
    return np.random.default_rng(child_seed(*path))
