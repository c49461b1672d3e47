import dataclasses

import numpy as np
import pytest

from dblab import ModelParams, SafeArm


@pytest.fixture
def base_params() -> ModelParams:
    """Baseline agent: moderately confident prior, thinking slightly faster
    than doing, noticeable flow cost, short deadline."""
    return ModelParams(p_bar=0.75, lam=0.75, mu=1.0, c=0.5, B=5.0, T=1.9)


@pytest.fixture
def safe_arm() -> SafeArm:
    """Baseline value of progress V(tau) = (1 - e^-tau) * 4.5."""
    return SafeArm(nu=1.0, B_nu=5.0, c_nu=0.5)


@pytest.fixture
def params_at(base_params):
    def make(T: float, **overrides) -> ModelParams:
        return dataclasses.replace(base_params, T=T, **overrides)
    return make


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
