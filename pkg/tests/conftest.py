import pytest

from perfkit.volume import Grid3


@pytest.fixture
def grid_small() -> Grid3:
    return Grid3((4, 3, 2), (1.0, 1.0, 3.0), (0.0, 0.0, 0.0))
