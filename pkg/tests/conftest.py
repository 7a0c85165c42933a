import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from kortmix.material import MaterialParams  # noqa: E402


@pytest.fixture
def params():
    return MaterialParams()


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)
