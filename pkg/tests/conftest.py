import numpy as np
import pytest

from ccbox import build_default_geometry, load_material_tables


@pytest.fixture(scope="session")
def geometry():
    return build_default_geometry()


@pytest.fixture(scope="session")
def materials():
    return load_material_tables()


@pytest.fixture()
def rng():
    return np.random.default_rng(20260823)
