"""Experiment orchestration: repeated stabilized estimation over query points.

A run sweeps a grid of (query point, repetition) cells for one estimator
configuration, applies the control-variate correction in every cell, and
aggregates the stability metrics into a machine-readable report. Seeds are
derived per cell from the master seed, so runs are reproducible and any cell
can be recomputed independently.
"""

from __future__ import annotations

import csv
import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .control import combine
from .core import (
    ConfigurationError,
    Dataset,
    FeatureMoments,
    child_seed,
)
from .estimators import (
    KernelDraws,
    kernelshap_projection,
    kernelshap_solve,
    kernelshap_values,
    shapley_sampling_all,
)
from .metrics import efficiency_gap, rank_changes, var_reduc
from .models import (
    FiniteDifferenceConfig,
    load_model,
    train_logistic,
    train_mlp,
    train_tree_ensemble,
    with_finite_differences,
)
from .simdata import generate_sim_dataset
from .surrogates import (
    TaylorSurrogate,
    dj_cache_key,
    ensure_dj,
    linear_shapley,
    quadratic_shapley,
)
from .values import GaussianConditioner, MonteCarloPairedValues, ValueFunctionConfig
from .variance import (
    KS_BOOTSTRAP,
    KS_GROUPED,
    KS_LEAST_SQUARES,
    SS_EMPIRICAL,
    ks_bootstrap_cov,
    ks_grouped_cov,
    ks_least_squares_cov,
    ss_cov_all,
)

SCHEMA_VERSION = 1
V_EMPTY_REFERENCE_SAMPLES = 20000


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one experiment run."""

    dataset: dict = field(default_factory=lambda: {"kind": "sim", "n": 1000, "seed": 0})
    model: dict = field(default_factory=lambda: {"kind": "logistic"})
    estimator: str = "shapley_sampling"
    mode: str = "correlated"
    variance_methods: tuple[str, ...] = ()
    m_coalitions: int = 1000
    samples_per_coalition: int = 1
    n_repetitions: int = 50
    n_query_points: int = 40
    master_seed: int = 0
    checkpoints: tuple[int, ...] = ()
    n_bootstrap: int = 200
    n_groups: int = 20
    dj_n_perms: int | None = None
    dj_cache_path: str | None = None

    def __post_init__(self):
        if self.estimator not in ("shapley_sampling", "kernelshap"):
            raise ConfigurationError(f"unknown estimator {self.estimator!r}")
        if self.mode not in ("independent", "correlated"):
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        for name in ("m_coalitions", "samples_per_coalition", "n_repetitions", "n_query_points"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be positive")
        methods = tuple(self.variance_methods) or (
            (SS_EMPIRICAL,) if self.estimator == "shapley_sampling" else (KS_LEAST_SQUARES,)
        )
        valid = (
            {SS_EMPIRICAL}
            if self.estimator == "shapley_sampling"
            else {KS_LEAST_SQUARES, KS_BOOTSTRAP, KS_GROUPED}
        )
        for m in methods:
            if m not in valid:
                raise ConfigurationError(f"variance method {m!r} invalid for {self.estimator}")
        object.__setattr__(self, "variance_methods", methods)
        cps = tuple(int(c) for c in self.checkpoints) or (self.m_coalitions,)
        if list(cps) != sorted(set(cps)) or cps[-1] != self.m_coalitions:
            raise ConfigurationError("checkpoints must be increasing and end at m_coalitions")
        object.__setattr__(self, "checkpoints", cps)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["variance_methods"] = list(self.variance_methods)
        out["checkpoints"] = list(self.checkpoints)
        return out

    @classmethod
    def from_dict(cls, payload: dict) -> "ExperimentConfig":
        payload = dict(payload)
        for key in ("variance_methods", "checkpoints"):
            if key in payload and payload[key] is not None:
                payload[key] = tuple(payload[key])
        return cls(**payload)

    def hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()


@dataclass
class ExperimentReport:
    """Per-point raw/corrected estimates across repetitions, plus metrics."""

    config: dict
    metadata: dict
    checkpoints: list
    feature_names: list
    points: list
    errors: list
    aggregates: dict
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "config": self.config,
            "metadata": self.metadata,
            "checkpoints": self.checkpoints,
            "feature_names": self.feature_names,
            "points": self.points,
            "errors": self.errors,
            "aggregates": self.aggregates,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ExperimentReport":
        return cls(
            schema_version=payload["schema_version"],
            config=payload["config"],
            metadata=payload["metadata"],
            checkpoints=payload["checkpoints"],
            feature_names=payload["feature_names"],
            points=payload["points"],
            errors=payload["errors"],
            aggregates=payload["aggregates"],
        )

    def write_json(self, path: str | Path):
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")))

    @classmethod
    def read_json(cls, path: str | Path) -> "ExperimentReport":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def write_csv(self, path: str | Path):
        """Flat per-(point, feature) aggregates at the final checkpoint."""
        rows = []
        for pt in self.points:
            vr = pt["var_reduc"][-1]
            defined = pt["var_reduc_defined"][-1]
            rho = np.array(pt["rho2"][-1]).mean(axis=0)
            raw_mean = np.array(pt["raw_model"][-1]).mean(axis=0)
            cv_mean = np.array(pt["cv"][-1]).mean(axis=0)
            for j, name in enumerate(self.feature_names):
                rows.append(
                    {
                        "point": pt["index"],
                        "feature": name,
                        "mean_raw": raw_mean[j],
                        "mean_cv": cv_mean[j],
                        "var_reduc": vr[j],
                        "var_reduc_defined": defined[j],
                        "anticipated_rho2": rho[j],
                        "rank_changes_raw": pt["rank_changes_raw"][-1],
                        "rank_changes_cv": pt["rank_changes_cv"][-1],
                    }
                )
        with Path(path).open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)


def _resolve_data(config: ExperimentConfig):
    """Background data, training labels, query points, and the data-true model."""
    spec = config.dataset
    kind = spec.get("kind", "sim")
    if kind == "sim":
        n = int(spec.get("n", 1000))
        seed = int(spec.get("seed", 0))
        kwargs = {}
        if "coef_scale" in spec:
            kwargs["coef_scale"] = float(spec["coef_scale"])
        sim = generate_sim_dataset(n + config.n_query_points, seed=seed, **kwargs)
        rows = sim.dataset.rows
        background = Dataset(rows=rows[:n], feature_names=sim.dataset.feature_names)
        queries = rows[n:]
        return background, sim.labels[:n], queries, sim.model
    if kind == "csv":
        dataset = Dataset.from_csv(spec["path"], spec.get("groups"))
        rng = np.random.default_rng(child_seed(config.master_seed, 4))
        idx = rng.choice(dataset.n, size=min(config.n_query_points, dataset.n), replace=False)
        return dataset, None, dataset.rows[np.sort(idx)], None
    raise ConfigurationError(f"unknown dataset kind {kind!r}")


def _build_model(config: ExperimentConfig, background: Dataset, labels, true_model):
    spec = config.model
    kind = spec.get("kind", "logistic")
    if kind == "file":
        return load_model(spec["path"])
    if kind == "true":
        if true_model is None:
            raise ConfigurationError("no generating model available for this dataset")
        return true_model
    if labels is None:
        raise ConfigurationError("training a model requires labeled (simulated) data")
    seed = int(np.random.default_rng(child_seed(config.master_seed, 5)).integers(2**31))
    if kind == "logistic":
        return train_logistic(background.rows, labels)
    if kind == "mlp":
        return train_mlp(
            background.rows, labels, hidden=int(spec.get("hidden", 50)), seed=seed
        )
    if kind == "forest":
        return train_tree_ensemble(
            background.rows,
            labels,
            n_trees=int(spec.get("n_trees", 50)),
            max_depth=int(spec.get("max_depth", 8)),
            min_leaf=int(spec.get("min_leaf", 5)),
            max_features=spec.get("max_features", "sqrt"),
            seed=seed,
        )
    raise ConfigurationError(f"unknown model kind {kind!r}")


def _reference_v_empty(model, mode: str, background: Dataset, moments: FeatureMoments, seed) -> float:
    """High-precision v(empty set) used as the efficiency-sum target."""
    if mode == "independent":
        return float(np.mean(model.predict(background.rows)))
    rng = np.random.default_rng(seed)
    chol_vals, chol_vecs = np.linalg.eigh(moments.sigma)
    factor = chol_vecs * np.sqrt(np.clip(chol_vals, 0.0, None))
    draws = moments.mu + rng.standard_normal((V_EMPTY_REFERENCE_SAMPLES, moments.d)) @ factor.T
    return float(np.mean(model.predict(draws)))


def _cov_for_method(method, config, draws, projection, result):
    if method == KS_LEAST_SQUARES:
        return ks_least_squares_cov(draws, projection)
    if method == KS_BOOTSTRAP:
        return ks_bootstrap_cov(
            draws,
            result.v_empty_model,
            result.v_empty_approx,
            result.v_full_model,
            result.v_full_approx,
            n_boot=config.n_bootstrap,
            seed=int(np.random.default_rng(child_seed(config.master_seed, 6)).integers(2**31)),
        )
    if method == KS_GROUPED:
        return ks_grouped_cov(
            draws,
            config.n_groups,
            result.v_empty_model,
            result.v_empty_approx,
            result.v_full_model,
            result.v_full_approx,
        )
    raise ConfigurationError(f"unknown variance method {method!r}")


def _run_cell_ss(values, config: ExperimentConfig, seed):
    """One (point, repetition) cell with the ordering-based estimator.

    Returns, per checkpoint, the raw paired estimates and their covariance
    records; checkpoints reuse the leading draws of the single longest run.
    """
    result = shapley_sampling_all(values, config.m_coalitions, seed=seed)
    per_checkpoint = []
    for m in config.checkpoints:
        gm, ga = result.g_model[:m], result.g_approx[:m]
        covs = ss_cov_all(gm, ga)
        per_checkpoint.append((gm.mean(axis=0), ga.mean(axis=0), covs))
    return per_checkpoint, {SS_EMPIRICAL: per_checkpoint[-1][2]}


def _run_cell_ks(values, config: ExperimentConfig, seed):
    result = kernelshap_values(values, config.m_coalitions, seed=seed)
    primary = config.variance_methods[0]
    per_checkpoint = []
    for m in config.checkpoints:
        if m == config.m_coalitions:
            phi_m = result.estimate_model.values
            phi_a = result.estimate_approx.values
            draws = result.draws
            projection = result.projection
        else:
            draws = result.draws.subset(np.arange(m))
            phi_m = kernelshap_solve(
                draws.z, draws.v_model, result.v_empty_model, result.v_full_model
            )
            phi_a = kernelshap_solve(
                draws.z, draws.v_approx, result.v_empty_approx, result.v_full_approx
            )
            projection = kernelshap_projection(draws.z)
        covs = _cov_for_method(primary, config, draws, projection, result)
        per_checkpoint.append((phi_m, phi_a, covs))
    extra = {primary: per_checkpoint[-1][2]}
    for method in config.variance_methods[1:]:
        extra[method] = _cov_for_method(method, config, result.draws, result.projection, result)
    return per_checkpoint, extra


def _run_point(
    config: ExperimentConfig,
    point_index: int,
    x: np.ndarray,
    model,
    derivative_model,
    moments: FeatureMoments,
    background: Dataset,
    dj,
    conditioner,
    v_empty_ref: float,
) -> dict:
    order = 2 if config.mode == "independent" else 1
    surrogate = TaylorSurrogate.from_model(derivative_model, x, order)
    if order == 2:
        exact_approx = quadratic_shapley(surrogate, x, moments)
    else:
        exact_approx = linear_shapley(surrogate, x, dj, moments)
    f_x = float(model.predict(x[None, :])[0])
    vf_config = ValueFunctionConfig(
        mode=config.mode, samples_per_coalition=config.samples_per_coalition
    )
    values = MonteCarloPairedValues(
        model, surrogate, x, vf_config, moments=moments, background=background,
        conditioner=conditioner,
    )
    n_cp = len(config.checkpoints)
    reps, d = config.n_repetitions, moments.d
    raw_model = np.empty((n_cp, reps, d))
    raw_approx = np.empty((n_cp, reps, d))
    cv = np.empty((n_cp, reps, d))
    alpha = np.empty((n_cp, reps, d))
    rho2 = np.empty((n_cp, reps, d))
    cov_records: dict[str, dict[str, np.ndarray]] = {}
    for r in range(reps):
        seed = child_seed(config.master_seed, 3, point_index, r)
        if config.estimator == "shapley_sampling":
            per_cp, extra = _run_cell_ss(values, config, seed)
        else:
            per_cp, extra = _run_cell_ks(values, config, seed)
        for c, (phi_m, phi_a, covs) in enumerate(per_cp):
            est_m = _as_estimate(phi_m, config.checkpoints[c], covs, which="model")
            est_a = _as_estimate(phi_a, config.checkpoints[c], covs, which="approx")
            controlled = combine(est_m, est_a, exact_approx, covs)
            raw_model[c, r] = phi_m
            raw_approx[c, r] = phi_a
            cv[c, r] = controlled.phi_cv
            alpha[c, r] = controlled.alpha
            rho2[c, r] = controlled.anticipated_rho2
        for method, covs in extra.items():
            rec = cov_records.setdefault(
                method,
                {
                    "var_model": np.empty((reps, d)),
                    "var_approx": np.empty((reps, d)),
                    "cov": np.empty((reps, d)),
                },
            )
            rec["var_model"][r] = [cv_.var_model for cv_ in covs]
            rec["var_approx"][r] = [cv_.var_approx for cv_ in covs]
            rec["cov"][r] = [cv_.cov for cv_ in covs]
    point = {
        "index": point_index,
        "x": x.tolist(),
        "f_x": f_x,
        "v_empty_ref": v_empty_ref,
        "exact_approx": exact_approx.tolist(),
        "raw_model": raw_model.tolist(),
        "raw_approx": raw_approx.tolist(),
        "cv": cv.tolist(),
        "alpha": alpha.tolist(),
        "rho2": rho2.tolist(),
        "cov_estimates": {
            method: {k: v.tolist() for k, v in rec.items()}
            for method, rec in sorted(cov_records.items())
        },
    }
    vr_all, defined_all, rc_raw, rc_cv, eff_raw, eff_cv, top5 = [], [], [], [], [], [], []
    for c in range(n_cp):
        vr, defined = var_reduc(raw_model[c], cv[c])
        vr_all.append(vr.tolist())
        defined_all.append(defined.tolist())
        rc_raw.append(rank_changes(raw_model[c]))
        rc_cv.append(rank_changes(cv[c]))
        eff_raw.append(efficiency_gap(raw_model[c], f_x, v_empty_ref).tolist())
        eff_cv.append(efficiency_gap(cv[c], f_x, v_empty_ref).tolist())
        magnitude = np.abs(raw_model[c].mean(axis=0))
        top = np.argsort(-magnitude, kind="stable")[: min(5, d)]
        top_defined = [j for j in top if defined[j]]
        top5.append(float(np.median(vr[top_defined])) if top_defined else None)
    point.update(
        {
            "var_reduc": vr_all,
            "var_reduc_defined": defined_all,
            "rank_changes_raw": rc_raw,
            "rank_changes_cv": rc_cv,
            "efficiency_raw": eff_raw,
            "efficiency_cv": eff_cv,
            "top5_median_var_reduc": top5,
        }
    )
    return point


def _as_estimate(values_vec, m, covs, which):
    from .core import ShapleyEstimate

    var = np.array([c.var_model if which == "model" else c.var_approx for c in covs])
    return ShapleyEstimate(values=np.asarray(values_vec), n_coalitions=int(m), variances=var)


def _aggregates(points: list[dict], errors: list[dict]) -> dict:
    out = {"n_failed_points": len(errors)}
    if not points:
        return out
    top5 = [p["top5_median_var_reduc"][-1] for p in points if p["top5_median_var_reduc"][-1] is not None]
    out["mean_top5_median_var_reduc"] = float(np.mean(top5)) if top5 else None
    reductions = []
    for p in points:
        rr, rc = p["rank_changes_raw"][-1], p["rank_changes_cv"][-1]
        if rr > 0:
            reductions.append((rr - rc) / rr)
    out["mean_rank_change_reduction"] = float(np.mean(reductions)) if reductions else None
    vr_cells, gap_cells = [], []
    for p in points:
        vr = np.array(p["var_reduc"][-1])
        defined = np.array(p["var_reduc_defined"][-1])
        rho = np.array(p["rho2"][-1]).mean(axis=0)
        vr_cells.extend(vr[defined].tolist())
        gap_cells.extend(np.abs(rho[defined] - vr[defined]).tolist())
    out["median_var_reduc_all_features"] = float(np.median(vr_cells)) if vr_cells else None
    out["median_abs_rho2_minus_var_reduc"] = float(np.median(gap_cells)) if gap_cells else None
    out["median_efficiency_gap_raw"] = float(
        np.median([g for p in points for g in p["efficiency_raw"][-1]])
    )
    out["median_efficiency_gap_cv"] = float(
        np.median([g for p in points for g in p["efficiency_cv"][-1]])
    )
    return out


def run_experiment(config: ExperimentConfig, report_path: str | Path | None = None) -> ExperimentReport:
    """Execute the full grid and assemble the report.

    A failing query point is recorded under ``errors`` and skipped; the run
    itself always completes. Identical configs (including the master seed)
    produce byte-identical reports.
    """
    background, labels, queries, true_model = _resolve_data(config)
    moments = FeatureMoments.from_dataset(background)
    model = _build_model(config, background, labels, true_model)
    if hasattr(model, "gradient") and hasattr(model, "hessian"):
        derivative_model = model
        fd_used = False
    else:
        fd_cfg = FiniteDifferenceConfig.from_dataset(background)
        derivative_model = with_finite_differences(model, fd_cfg)
        fd_used = True
    dj = None
    dj_key = None
    if config.mode == "correlated":
        dj_seed = int(np.random.default_rng(child_seed(config.master_seed, 1)).integers(2**31))
        dj = ensure_dj(
            moments,
            cache_path=config.dj_cache_path,
            n_perms=config.dj_n_perms,
            seed=dj_seed,
        )
        dj_key = dj_cache_key(
            moments.d,
            moments,
            None if dj.exact else dj.n_permutations,
            None if dj.exact else dj_seed,
        )
    conditioner = GaussianConditioner(moments) if config.mode == "correlated" else None
    v_empty_ref = _reference_v_empty(
        model, config.mode, background, moments, child_seed(config.master_seed, 2)
    )
    points, errors = [], []
    for p, x in enumerate(queries):
        print(
            f"[stableshap] point {p + 1}/{len(queries)} "
            f"({config.estimator}, {config.mode})",
            file=sys.stderr,
            flush=True,
        )
        try:
            points.append(
                _run_point(
                    config, p, np.asarray(x, dtype=float), model, derivative_model,
                    moments, background, dj, conditioner, v_empty_ref,
                )
            )
        except Exception as exc:  # noqa: BLE001 - a bad point must not kill the run
            errors.append({"index": p, "error": f"{type(exc).__name__}: {exc}"})
    metadata = {
        "config_hash": config.hash(),
        "master_seed": config.master_seed,
        "dj_cache_key": dj_key,
        "dj_exact": None if dj is None else dj.exact,
        "finite_differences": fd_used,
        "sigma": moments.sigma.tolist(),
        "mu": moments.mu.tolist(),
        "v_empty_reference": v_empty_ref,
        "ranking_key": "descending absolute value, ties by feature index",
        "categorical_groups": [list(g) for g in background.categorical_groups],
    }
    report = ExperimentReport(
        config=config.to_dict(),
        metadata=metadata,
        checkpoints=list(config.checkpoints),
        feature_names=list(background.feature_names),
        points=points,
        errors=errors,
        aggregates=_aggregates(points, errors),
    )
    if report_path is not None:
        report.write_json(report_path)
    return report
