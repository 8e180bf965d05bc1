import numpy as np
import pytest

from panelinfluence import PanelDataset


def random_panel(seed, N=12, T=5, k=2, unbalanced=False):
    """Random fixed-effects panel with unit ids 1..N."""
    rng = np.random.default_rng(seed)
    periods = rng.integers(min(max(2, k), T), T + 1, N) if unbalanced else np.full(N, T)
    units, times = [], []
    for u, p in enumerate(periods, start=1):
        ts = np.sort(rng.choice(np.arange(1, 2 * T + 1), p, replace=False)) if unbalanced else np.arange(1, p + 1)
        units += [u] * p
        times += list(ts)
    n = len(units)
    X = rng.normal(size=(n, k))
    alpha = np.repeat(rng.uniform(0, 10, N), periods)
    y = X @ rng.normal(size=k) + alpha + rng.normal(size=n)
    return PanelDataset.from_long(units, times, y, X)


@pytest.fixture
def panel():
    return random_panel(0)


def rel_err(a, b):
    return np.linalg.norm(np.asarray(a) - np.asarray(b)) / np.linalg.norm(b)
