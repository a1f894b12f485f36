import numpy as np
import pytest

from fphmc import basis as bs
from fphmc import em


def random_dataset(rng, n=40, m=21, with_curves=True, censor_scale=2.0):
    """Small random survival dataset for property tests; always has an event."""
    x1 = rng.uniform(-1, 1, n)
    x2 = rng.uniform(-1, 1, n)
    T = rng.exponential(scale=1.0, size=n) * np.exp(-0.3 * x1)
    C = rng.exponential(scale=censor_scale, size=n)
    time = np.minimum(T, C)
    event = (T <= C).astype(int)
    if not event.any():
        event[int(np.argmin(time))] = 1
    curves = None
    if with_curves:
        grid = bs.make_grid(m)
        curves = bs.FunctionalCovariate(grid, rng.standard_normal((n, m)))
    return em.SurvivalDataset(
        time=time,
        event=event,
        Z=np.column_stack([np.ones(n), x1, x2]),
        X=np.column_stack([x1, x2]),
        z_curves=curves,
        x_curves=curves,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
