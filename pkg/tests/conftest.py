from pathlib import Path

import numpy as np
import pytest

from app.models_schemas.models import PathFamily, TrivializationFamily
from app.services.bundle_service import BundleService
from app.services.scenario_service import ScenarioService

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


@pytest.fixture
def fixture_path():
    return lambda name: FIXTURES / name


@pytest.fixture
def load_scenario():
    def load(name: str):
        return ScenarioService.load_config((FIXTURES / name).read_bytes())
    return load


@pytest.fixture
def line_path():
    return BundleService.make_path(PathFamily.LINE, (0.0, 2.0), 41)


@pytest.fixture
def figure_eight_path():
    return BundleService.make_path(PathFamily.FIGURE_EIGHT, (0.0, 2.0 * np.pi), 65)


@pytest.fixture(params=["identity", "rotation_field", "seeded_random_unitary"])
def trivialization_dim2(request):
    return BundleService.make_trivialization(
        TrivializationFamily(request.param), 2, axis=[0.3, -0.4, 1.0], gradient=[0.9, 0.2, -0.5], seed=5
    )
