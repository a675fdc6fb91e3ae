import numpy as np
import pytest

from roughheat.coefficients import generate_field
from roughheat.elliptic import assemble_operator
from roughheat.geometry import GridSpec, TimeLadder


@pytest.fixture(scope="session")
def grid128():
    return GridSpec(1, 128, 8.0)


@pytest.fixture(scope="session")
def grid256():
    return GridSpec(1, 256, 8.0)


@pytest.fixture(scope="session")
def ladder_basic():
    return TimeLadder(1.0, 12, 2)


@pytest.fixture(scope="session")
def op_identity(grid128):
    op = assemble_operator(generate_field(grid128, "constant", (1.0, 1.0)),
                           grid128)
    op.prepare()
    return op


@pytest.fixture(scope="session")
def checkerboard_field(grid128):
    return generate_field(grid128, "checkerboard", (1.0, 10.0), cells=16,
                          seed=5)


@pytest.fixture(scope="session")
def op_checkerboard(checkerboard_field, grid128):
    op = assemble_operator(checkerboard_field, grid128)
    op.prepare()
    return op


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)
