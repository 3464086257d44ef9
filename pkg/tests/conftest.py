import pytest
from hypothesis import HealthCheck, settings

from src.constructions.hardness import theorem3_instance, theorem6_instance
from src.constructions.random_models import RandomPomdpSpec, random_pomdp
from src.pomdp_core.policy import Policy
from src.utils.rng import make_rng
from src.utils.settings_manager import CAP_ENVIRONMENT_VARIABLE
from src.utils.types import GenerationRevealing

settings.register_profile(
    "default",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _no_cap_override(monkeypatch):
    monkeypatch.delenv(CAP_ENVIRONMENT_VARIABLE, raising=False)


@pytest.fixture
def home(tmp_path, monkeypatch):
    """Isolated HOME and working directory for settings and log files."""
    monkeypatch.setenv("HOME", str(tmp_path))
    monkeypatch.chdir(tmp_path)
    return tmp_path


@pytest.fixture
def revealing_model():
    spec = RandomPomdpSpec(
        horizon=3,
        state_counts=[2, 2, 2],
        action_count=2,
        obs_counts=[3, 3, 3],
        revealing=GenerationRevealing.SINGLE,
        min_singular=0.05,
    )
    return random_pomdp(spec, make_rng(7), name="revealing")


@pytest.fixture
def uniform(revealing_model):
    return Policy.uniform(revealing_model)


@pytest.fixture
def rng():
    return make_rng(1234)


@pytest.fixture(scope="session")
def chain4():
    return theorem3_instance(4)


@pytest.fixture(scope="session")
def knife_edge6():
    return theorem6_instance(6)
