# tests/conftest.py
from pathlib import Path

import numpy as np
import pytest

from piezoscatter.core.settings import init_settings
from piezoscatter.dto.config import MaterialDTO
from piezoscatter.repository.config import load_config
from piezoscatter.service import primitives

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture(autouse=True, scope="session")
def test_settings():
    return init_settings(load_env_file=False, workers=1, seed=0)


@pytest.fixture(scope="session")
def reference_tet():
    return primitives.reference_tet()


@pytest.fixture(scope="session")
def unit_cube():
    return primitives.cube(1)


@pytest.fixture(scope="session")
def cube2():
    return primitives.cube(2)


@pytest.fixture(scope="session")
def icosphere1():
    return primitives.icosphere(1)


@pytest.fixture(scope="session")
def icosphere2():
    return primitives.icosphere(2)


def make_material(**overrides):
    document = dict(MaterialDTO.model_config["json_schema_extra"]["example"])
    document.update(overrides)
    return MaterialDTO.model_validate(document).to_domain()


@pytest.fixture()
def material_document():
    return dict(MaterialDTO.model_config["json_schema_extra"]["example"])


@pytest.fixture()
def sample_material():
    return make_material()


@pytest.fixture(scope="session")
def sample_config_path():
    return DATA_DIR / "sample.cfg"


@pytest.fixture(scope="session")
def sample_config(sample_config_path):
    return load_config(sample_config_path)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
