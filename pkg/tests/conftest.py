import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from galqreg.model import PanelDataset, PanelUnit, PriorSpec


@pytest.fixture
def tiny_intercept_data():
    """n=4, T=2, k=1 intercept-only panel (the marginal-likelihood fixture)."""
    gen = np.random.default_rng(99)
    n, t = 4, 2
    alpha = gen.normal(0.0, 1.0, n)
    y = 1.0 + np.repeat(alpha, t) + gen.logistic(0.0, 0.7, n * t)
    units = [
        PanelUnit(id=f"u{i}", y=y[i * t : (i + 1) * t], X=np.ones((t, 1)), Z=np.ones((t, 1)))
        for i in range(n)
    ]
    return PanelDataset(units, z_in_x=(0,), x_names=("const",), z_names=("const",))


@pytest.fixture
def tiny_intercept_priors():
    return PriorSpec(
        beta0=np.zeros(1), B0=np.array([[25.0]]), n0=5.0, d0=8.0, c1=6.0, d1=4.0
    )


@pytest.fixture
def frozen_small_data():
    """n=2, T=2, k=1, l=1 panel used by the kernel goodness-of-fit checks."""
    gen = np.random.default_rng(7)
    n, t = 2, 2
    y = 0.5 + gen.normal(0.0, 1.0, n * t)
    units = [
        PanelUnit(id=f"u{i}", y=y[i * t : (i + 1) * t], X=np.ones((t, 1)), Z=np.ones((t, 1)))
        for i in range(n)
    ]
    return PanelDataset(units, z_in_x=(0,), x_names=("const",), z_names=("const",))
