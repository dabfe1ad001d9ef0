import json

import numpy as np
import pytest

from infinifree.measures import InfLaw


# moment tables with nothing special about them, for identities that must
# hold for every law
GENERIC_STD = [1, 0.3, 1.2, 0.7, 2.5, 1.9, 6.1, 4.4, 17.0, 12.5, 50.3]
GENERIC_INF = [0, 0.5, -0.2, 1.1, 0.4, -0.6, 0.9, 0.3, -1.2, 0.8, 2.1]


@pytest.fixture
def semicircle():
    return InfLaw.semicircle(0.0, 1.0)


@pytest.fixture
def spike():
    """(δ₀, δ₂ − δ₀): the limit of diag(2, 0, …, 0)."""
    return InfLaw.atomic([(0.0, 1.0, -1.0), (2.0, 0.0, 1.0)])


@pytest.fixture
def generic():
    return InfLaw.from_moments(GENERIC_STD, GENERIC_INF, support_bound=4.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def write_json(tmp_path):
    def write(name, data):
        path = tmp_path / name
        path.write_text(json.dumps(data))
        return str(path)
    return write
