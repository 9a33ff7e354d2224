from __future__ import annotations

import numpy as np
import pytest

from spatialrisk.correlation import CorrelationFunction
from spatialrisk.models import TEG, ExtremalGaussian, InvertedMaxStable, MaxMixture, MaxStable, Smith

EXP_02 = CorrelationFunction("exponential", 0.2)

MAX_STABLE_FAMILIES = {
    "smith": Smith(0.6),
    "eg-exponential": ExtremalGaussian(CorrelationFunction("exponential", 0.3)),
    "eg-matern": ExtremalGaussian(CorrelationFunction("matern", 0.3, kappa=1.5)),
    "eg-spherical": ExtremalGaussian(CorrelationFunction("spherical", 0.5)),
    "teg": TEG(EXP_02, 0.25),
    "teg-disk": TEG(EXP_02, 0.25, overlap="disk"),
}


def dependence_models():
    teg = MAX_STABLE_FAMILIES["teg"]
    smith1 = Smith(1.0)
    out = {}
    for name, m in MAX_STABLE_FAMILIES.items():
        out[f"max-stable/{name}"] = MaxStable(m)
        out[f"inverted/{name}"] = InvertedMaxStable(m)
    for a in (0.0, 0.3, 0.5, 1.0):
        out[f"mixture/a={a}"] = MaxMixture(a, teg, smith1)
    return out


DEPENDENCE_MODELS = dependence_models()


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


def random_points(rng, size, hmax=1.5):
    h = rng.uniform(0.0, hmax, size)
    x1 = np.exp(rng.uniform(np.log(1e-2), np.log(1e3), size))
    x2 = np.exp(rng.uniform(np.log(1e-2), np.log(1e3), size))
    return h, x1, x2


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
