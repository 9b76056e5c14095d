import copy

import numpy as np
import pytest

from fdlyap.config import build, resolve
from fdlyap.presets import get_preset


def qubit_config(**changes):
    """Resolved config derived from the drift-free qubit preset."""
    d = copy.deepcopy(get_preset("qubit-driftfree").config)
    for k, v in changes.items():
        if isinstance(v, dict) and isinstance(d.get(k), dict):
            d[k].update(v)
        else:
            d[k] = v
    return resolve(d)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_cfg():
    return build(qubit_config(n_steps=40, analysis={"window": 10}))


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
