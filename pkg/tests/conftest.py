from pathlib import Path

import pytest

from rectfrac import GridConfig, gen_cascade, gen_uniform

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def line_cfg():
    return GridConfig((1,), 4)


@pytest.fixture(scope="session")
def square_cfg():
    return GridConfig((1, 1), 3)


@pytest.fixture(scope="session")
def uniform_line(line_cfg):
    return gen_uniform(line_cfg)


@pytest.fixture(scope="session")
def uniform_square(square_cfg):
    return gen_uniform(square_cfg)


@pytest.fixture(scope="session")
def cascade_square(square_cfg):
    return gen_cascade(square_cfg, 2.0, 7)
