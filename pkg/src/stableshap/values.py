"""Coalition value functions: v_x(S), the expected prediction given X_S = x_S.

Two sampling regimes are implemented. "independent" completes the missing
features with rows drawn from the background data (all missing coordinates
come jointly from one row, preserving their dependence). "correlated" draws
completions from the multivariate normal conditional of the missing features
given the observed ones. Both regimes evaluate the black-box model and its
Taylor surrogate on the *same* completion points, which maximizes the
correlation exploited by the control-variate correction.

Exact (sampling-free) values for linear and quadratic surrogates are also
provided; they anchor the closed-form Shapley expressions and the test
oracles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    Coalition,
    ConfigurationError,
    Dataset,
    DimensionError,
    FeatureMoments,
    _frozen_array,
)

RIDGE_CONDITION_LIMIT = 1e10
RIDGE_SCALE = 1e-6


@dataclass(frozen=True)
class ValueFunctionConfig:
    """How coalition values are estimated.

    ``samples_per_coalition`` must be at least 2 if the least-squares
    variance estimator will be applied downstream.
    """

    mode: str = "independent"
    samples_per_coalition: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("independent", "correlated"):
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        if self.samples_per_coalition < 1:
            raise ConfigurationError("samples_per_coalition must be >= 1")


@dataclass(frozen=True)
class PairedValue:
    """Model and surrogate values of one coalition, on shared samples."""

    v_model: float
    v_approx: float
    per_sample_model: np.ndarray
    per_sample_approx: np.ndarray

    def __post_init__(self):
        psm = _frozen_array(self.per_sample_model)
        psa = _frozen_array(self.per_sample_approx)
        if psm.shape != psa.shape:
            raise DimensionError("per-sample vectors must have identical length")
        if psm.size:
            if abs(psm.mean() - self.v_model) > 1e-9 * max(1.0, abs(self.v_model)):
                raise ValueError("v_model must equal the mean of its samples")
            if abs(psa.mean() - self.v_approx) > 1e-9 * max(1.0, abs(self.v_approx)):
                raise ValueError("v_approx must equal the mean of its samples")
        object.__setattr__(self, "per_sample_model", psm)
        object.__setattr__(self, "per_sample_approx", psa)


def _mask_key(mask: np.ndarray) -> int:
    key = 0
    for i in np.flatnonzero(mask):
        key |= 1 << int(i)
    return key


def _regularized_solve_block(sigma, s_idx):
    """Sigma_SS^{-1} applied via solve, with a ridge when badly conditioned."""
    block = sigma[np.ix_(s_idx, s_idx)]
    if np.linalg.cond(block) > RIDGE_CONDITION_LIMIT:
        lam = RIDGE_SCALE * np.trace(block) / len(s_idx)
        block = block + lam * np.eye(len(s_idx))
    return block


class GaussianConditioner:
    """Caches per-coalition conditional factors of N(mu, sigma).

    The cross-projection W = Sigma_{S^c,S} Sigma_{S,S}^{-1} and the sampling
    factor of the conditional covariance depend only on S, so they are cached
    by coalition bitmask and shared across query points and repetitions.
    """

    def __init__(self, moments: FeatureMoments):
        self.moments = moments
        self._cache: dict[int, tuple] = {}

    def factors(self, mask: np.ndarray):
        key = _mask_key(mask)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        mu, sigma = self.moments.mu, self.moments.sigma
        d = mu.size
        s_idx = np.flatnonzero(mask).astype(int)
        c_idx = np.flatnonzero(np.asarray(mask) == 0).astype(int)
        if s_idx.size == 0:
            cov = sigma.copy()
            w = np.zeros((d, 0))
        elif c_idx.size == 0:
            cov = np.zeros((0, 0))
            w = np.zeros((0, s_idx.size))
        else:
            block = _regularized_solve_block(sigma, s_idx)
            try:
                w = np.linalg.solve(block, sigma[np.ix_(s_idx, c_idx)]).T
            except np.linalg.LinAlgError as exc:
                raise np.linalg.LinAlgError(
                    f"Sigma_SS singular beyond regularization for S={tuple(s_idx)}"
                ) from exc
            cov = sigma[np.ix_(c_idx, c_idx)] - w @ sigma[np.ix_(s_idx, c_idx)]
            cov = 0.5 * (cov + cov.T)
        if cov.size:
            vals, vecs = np.linalg.eigh(cov)
            factor = vecs * np.sqrt(np.clip(vals, 0.0, None))
        else:
            factor = np.zeros((0, 0))
        entry = (s_idx, c_idx, w, cov, factor)
        self._cache[key] = entry
        return entry

    def mean(self, mask: np.ndarray, x: np.ndarray) -> np.ndarray:
        s_idx, c_idx, w, _, _ = self.factors(mask)
        mu = self.moments.mu
        return mu[c_idx] + w @ (x[s_idx] - mu[s_idx])


def conditional_gaussian(
    moments: FeatureMoments, coalition: Coalition, x: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Conditional mean and covariance of the missing features given x_S.

    Returns (mu, sigma) unchanged for the empty coalition and empty arrays
    for the full one.
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.size != moments.d or coalition.d != moments.d:
        raise DimensionError("dimension mismatch between x, coalition and moments")
    cond = GaussianConditioner(moments)
    s_idx, c_idx, w, cov, _ = cond.factors(coalition.mask)
    mean = moments.mu[c_idx] + w @ (x[s_idx] - moments.mu[s_idx])
    return mean, cov


def exact_value_linear(beta, b: float, coalition: Coalition, x, moments: FeatureMoments) -> float:
    """Exact Gaussian-conditional expectation of beta.x' + b given x_S."""
    beta = np.asarray(beta, dtype=float).ravel()
    x = np.asarray(x, dtype=float).ravel()
    mean, _ = conditional_gaussian(moments, coalition, x)
    c_idx = np.asarray(coalition.complement, dtype=int)
    s_idx = np.asarray(coalition.indices, dtype=int)
    total = float(b)
    if s_idx.size:
        total += beta[s_idx] @ x[s_idx]
    if c_idx.size:
        total += beta[c_idx] @ mean
    return total


def exact_value_quadratic(
    J, H, f_x: float, coalition: Coalition, x, moments: FeatureMoments
) -> float:
    """Exact marginal-sampling expectation of the quadratic surrogate given x_S.

    v_x(S) = f(x) + (mu_c - x_c)' J_c
             + 1/2 [tr(H_cc Sigma_cc) + (mu_c - x_c)' H_cc (mu_c - x_c)]
    with c the complement of S.
    """
    J = np.asarray(J, dtype=float).ravel()
    H = np.asarray(H, dtype=float)
    x = np.asarray(x, dtype=float).ravel()
    if np.max(np.abs(H - H.T)) > 1e-10:
        raise ValueError("H must be symmetric")
    c_idx = np.asarray(coalition.complement, dtype=int)
    if c_idx.size == 0:
        return float(f_x)
    delta = moments.mu[c_idx] - x[c_idx]
    h_cc = H[np.ix_(c_idx, c_idx)]
    sig_cc = moments.sigma[np.ix_(c_idx, c_idx)]
    quad = np.trace(h_cc @ sig_cc) + delta @ h_cc @ delta
    return float(f_x + delta @ J[c_idx] + 0.5 * quad)


@dataclass(frozen=True)
class PairedBatch:
    """Vectorized paired values for a batch of coalitions."""

    v_model: np.ndarray  # (n,)
    v_approx: np.ndarray  # (n,)
    per_sample_model: np.ndarray  # (n, samples)
    per_sample_approx: np.ndarray  # (n, samples)


class MonteCarloPairedValues:
    """Sampled paired value function for (model, surrogate) at a query point.

    Both streams are evaluated on byte-identical completion points. In the
    correlated mode the standard normals driving each coalition are indexed
    by position in the batch, so results do not depend on evaluation order.
    """

    def __init__(
        self,
        model,
        surrogate,
        x,
        config: ValueFunctionConfig,
        moments: FeatureMoments | None = None,
        background: Dataset | None = None,
        conditioner: GaussianConditioner | None = None,
    ):
        self.model = model
        self.surrogate = surrogate
        self.x = np.asarray(x, dtype=float).ravel()
        self.config = config
        self.moments = moments
        self.background = background
        if config.mode == "independent":
            if background is None:
                raise ConfigurationError("independent mode requires background data")
            self.d = background.d
        else:
            if moments is None:
                raise ConfigurationError("correlated mode requires feature moments")
            self.d = moments.d
            # the per-coalition factors depend only on the moments, so one
            # conditioner can be shared across query points and repetitions
            self._conditioner = conditioner or GaussianConditioner(moments)
        if self.x.size != self.d:
            raise DimensionError("x length does not match feature dimension")

    def values_full(self) -> tuple[float, float]:
        """v_x(1) for both streams: the prediction at x itself, exactly."""
        return (
            float(self.model.predict(self.x[None, :])[0]),
            float(self.surrogate.predict(self.x[None, :])[0]),
        )

    def values_empty_anchor(self, seed=None, n_samples: int = 4096) -> tuple[float, float]:
        """High-precision v_x(0) for both streams.

        Used as the constraint anchor by KernelSHAP, where v(0) enters every
        repetition as a constant; a noisy anchor would add variance invisible
        to all of the variance estimators. Independent mode averages over the
        entire background (exact for the empirical distribution); correlated
        mode uses one large seeded draw from N(mu, sigma).
        """
        if self.config.mode == "independent":
            rows = self.background.rows
            return (
                float(np.mean(self.model.predict(rows))),
                float(np.mean(self.surrogate.predict(rows))),
            )
        rng = np.random.default_rng(self.config.seed if seed is None else seed)
        _, _, _, _, factor = self._conditioner.factors(np.zeros(self.d, dtype=np.int8))
        draws = self.moments.mu + rng.standard_normal((n_samples, self.d)) @ factor.T
        return (
            float(np.mean(self.model.predict(draws))),
            float(np.mean(self.surrogate.predict(draws))),
        )

    def _completions(self, masks: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        n = masks.shape[0]
        ns = self.config.samples_per_coalition
        if self.config.mode == "independent":
            rows = self.background.rows
            draw = rows[rng.integers(0, rows.shape[0], size=(n, ns))]
            keep = masks.astype(bool)[:, None, :]
            return np.where(keep, self.x, draw)
        # correlated: group identical coalitions, one conditional draw batch each
        noise = rng.standard_normal((n, ns, self.d))
        points = np.broadcast_to(self.x, (n, ns, self.d)).copy()
        keys = masks.astype(np.int64) @ (1 << np.arange(self.d, dtype=np.int64))
        order = np.argsort(keys, kind="stable")
        boundaries = np.flatnonzero(np.diff(keys[order])) + 1
        for sel in np.split(order, boundaries):
            mask = masks[sel[0]]
            s_idx, c_idx, w, _, factor = self._conditioner.factors(mask)
            k = c_idx.size
            if k == 0:
                continue
            mean = self.moments.mu[c_idx] + w @ (self.x[s_idx] - self.moments.mu[s_idx])
            samples = mean + noise[sel][:, :, :k] @ factor.T
            points[np.ix_(sel, np.arange(ns), c_idx)] = samples
        return points

    def values_batch(self, masks: np.ndarray, seed=None) -> PairedBatch:
        masks = np.atleast_2d(np.asarray(masks, dtype=np.int8))
        if masks.shape[1] != self.d:
            raise DimensionError("mask width does not match feature dimension")
        rng = np.random.default_rng(self.config.seed if seed is None else seed)
        n = masks.shape[0]
        ns = self.config.samples_per_coalition
        points = self._completions(masks, rng)
        flat = points.reshape(n * ns, self.d)
        pm = np.asarray(self.model.predict(flat), dtype=float).reshape(n, ns)
        pa = np.asarray(self.surrogate.predict(flat), dtype=float).reshape(n, ns)
        return PairedBatch(
            v_model=pm.mean(axis=1),
            v_approx=pa.mean(axis=1),
            per_sample_model=pm,
            per_sample_approx=pa,
        )


class ExactPairedValues:
    """Deterministic paired value function built from closed-form values.

    Used when the "model" itself is a surrogate whose coalition values have a
    closed form; sampling noise then vanishes and only coalition choice is
    random. Values are cached by coalition bitmask.
    """

    def __init__(self, d: int, value_model, value_approx=None):
        self.d = d
        self._value_model = value_model
        self._value_approx = value_approx or value_model
        self._cache: dict[int, tuple[float, float]] = {}

    def _pair(self, mask: np.ndarray) -> tuple[float, float]:
        key = _mask_key(mask)
        hit = self._cache.get(key)
        if hit is None:
            coalition = Coalition(mask=mask)
            hit = (float(self._value_model(coalition)), float(self._value_approx(coalition)))
            self._cache[key] = hit
        return hit

    def values_full(self) -> tuple[float, float]:
        return self._pair(np.ones(self.d, dtype=np.int8))

    def values_empty_anchor(self, seed=None, n_samples: int = 0) -> tuple[float, float]:
        return self._pair(np.zeros(self.d, dtype=np.int8))

    def values_batch(self, masks: np.ndarray, seed=None) -> PairedBatch:
        masks = np.atleast_2d(np.asarray(masks, dtype=np.int8))
        pairs = np.array([self._pair(m) for m in masks])
        vm, va = pairs[:, 0], pairs[:, 1]
        # duplicate the exact value so per-coalition sample variance is 0
        return PairedBatch(
            v_model=vm,
            v_approx=va,
            per_sample_model=np.repeat(vm[:, None], 2, axis=1),
            per_sample_approx=np.repeat(va[:, None], 2, axis=1),
        )


def evaluate_value(
    model,
    surrogate,
    coalition: Coalition,
    x,
    config: ValueFunctionConfig,
    moments: FeatureMoments | None = None,
    background: Dataset | None = None,
    seed=None,
) -> PairedValue:
    """Estimate v_x(S) for the model and its surrogate on shared samples.

    The full coalition is exact: v = f(x), with zero-length sample vectors.
    """
    vf = MonteCarloPairedValues(model, surrogate, x, config, moments, background)
    if coalition.size == vf.d:
        vm, va = vf.values_full()
        empty = np.zeros(0)
        return PairedValue(v_model=vm, v_approx=va, per_sample_model=empty, per_sample_approx=empty)
    batch = vf.values_batch(coalition.mask[None, :], seed=seed)
    return PairedValue(
        v_model=float(batch.v_model[0]),
        v_approx=float(batch.v_approx[0]),
        per_sample_model=batch.per_sample_model[0],
        per_sample_approx=batch.per_sample_approx[0],
    )
