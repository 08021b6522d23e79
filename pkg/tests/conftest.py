import numpy as np
import pytest

from stresspop import (
    ConstantHazard,
    ConstantStress,
    GammaAgeHazard,
    ModelParams,
    switching_rate_for_q,
)


@pytest.fixture(scope="session")
def fig_beta0():
    return GammaAgeHazard(3.0, 1.0)


@pytest.fixture(scope="session")
def fig_beta1():
    return GammaAgeHazard(3.0, 0.1)


@pytest.fixture(scope="session")
def make_params(fig_beta0, fig_beta1):
    """Model builder: q is converted to the switching rate for beta0."""

    def build(p=0.4, q=0.4, gamma=0.5, beta0=None, beta1=None, stress=None):
        b0 = beta0 if beta0 is not None else fig_beta0
        b1 = beta1 if beta1 is not None else fig_beta1
        alpha = switching_rate_for_q(b0, q)
        return ModelParams(
            beta0=b0,
            beta1=b1,
            alpha=alpha,
            gamma=gamma,
            stress=stress if stress is not None else ConstantStress(p),
        )

    return build


@pytest.fixture(scope="session")
def memoryless_params():
    """Constant-hazard model: every closed form is elementary."""

    def build(b0=1.0, b1=0.1, alpha=0.5, gamma=0.5, p=0.25):
        return ModelParams(
            beta0=ConstantHazard(b0),
            beta1=ConstantHazard(b1),
            alpha=alpha,
            gamma=gamma,
            stress=ConstantStress(p),
        )

    return build


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
