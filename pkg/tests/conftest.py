import numpy as np
import pytest

import stableshap as ss


def random_moments(d: int, seed: int, unit_diag: bool = False) -> ss.FeatureMoments:
    """A well-conditioned random covariance with optional unit diagonal."""
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(d, d))
    sigma = a @ a.T / d + 0.5 * np.eye(d)
    if unit_diag:
        sd = np.sqrt(np.diag(sigma))
        sigma = sigma / np.outer(sd, sd)
    mu = rng.normal(0.0, 0.4, size=d)
    return ss.FeatureMoments(mu=mu, sigma=0.5 * (sigma + sigma.T))


@pytest.fixture(scope="session")
def sim_small():
    """Shared small simulated problem: background, trained model, moments."""
    sim = ss.generate_sim_dataset(640, seed=3)
    background = ss.Dataset(rows=sim.dataset.rows[:600], feature_names=sim.dataset.feature_names)
    model = ss.train_logistic(background.rows, sim.labels[:600])
    moments = ss.FeatureMoments.from_dataset(background)
    queries = sim.dataset.rows[600:]
    return background, model, moments, queries
