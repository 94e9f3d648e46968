from __future__ import annotations

import numpy as np
import pytest

from qlsreg.kernels import KernelFamily
from qlsreg.montecarlo import draw_response
from qlsreg.montecarlo import study1_design
from qlsreg.regress import RegressionModel
from qlsreg.utils import spawn_generator


def pytest_addoption(parser: pytest.Parser) -> None:
    parser.addoption(
        '--runslow',
        action='store_true',
        default=False,
        help='run the Monte Carlo acceptance tests',
    )


def pytest_collection_modifyitems(
    config: pytest.Config,
    items: list[pytest.Item],
) -> None:
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture()
def lognormal() -> KernelFamily:
    return KernelFamily(name='log-no')


def make_model(
    family: KernelFamily,
    q: float = 0.5,
    n: int = 200,
    seed: int = 3,
    beta: tuple[float, float] = (1.5, 0.5),
    tau: tuple[float, float] = (1.0, 0.5),
) -> RegressionModel:
    """Draw a dataset from the estimation-study design."""
    rng = spawn_generator(seed, n)
    X, W = study1_design(n, rng)
    y = draw_response(family, q, X @ np.array(beta), W @ np.array(tau), rng)
    return RegressionModel(y=y, X=X, W=W, q=q, family=family)


@pytest.fixture()
def heteroscedastic_model(lognormal: KernelFamily) -> RegressionModel:
    return make_model(lognormal, q=0.25)
