import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from delaycredit import DebtContract, FirmModel, HistoryPath, MarketParams, VolSpec

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def market():
    return MarketParams(0.05)


@pytest.fixture
def contract():
    return DebtContract(face=90.0, maturity=1.0)


@pytest.fixture
def wavy_history():
    """Firm value on [-1, 0] sampled every 1/256 year."""
    return HistoryPath.from_function(lambda t: 100.0 + 10.0 * math.sin(3.0 * t), -1.0, 0.0, 1 / 256)


@pytest.fixture
def affine_model():
    return FirmModel(alpha=0.0005, l1=0.5, l2=1.0, vol=VolSpec.affine(0.1, 0.001, 0.05))


@pytest.fixture
def gbm_model():
    return FirmModel(alpha=0.0, l1=0.5, l2=1.0, vol=VolSpec.constant(0.2))
