import pytest

from app.config import get_settings
from app.main import build_parser
from app.models import IntegratorConfig
from app.services.hilbert import resolve_cutoff


@pytest.fixture
def env_settings(monkeypatch):
    monkeypatch.setenv("FOCK_CUTOFF", "5")
    monkeypatch.setenv("INTEGRATOR_TOL", "1e-3")
    monkeypatch.setenv("MAX_REFINEMENTS", "2")
    get_settings.cache_clear()
    yield get_settings()
    monkeypatch.undo()
    get_settings.cache_clear()


def test_environment_overrides_reach_the_defaults(env_settings):
    assert (env_settings.FOCK_CUTOFF, env_settings.INTEGRATOR_TOL, env_settings.MAX_REFINEMENTS) == (5, 1e-3, 2)
    cfg = IntegratorConfig()
    assert cfg.tol == 1e-3
    assert cfg.max_refinements == 2
    assert resolve_cutoff() == 5
    assert resolve_cutoff(12) == 12


def test_explicit_values_win_over_settings(env_settings):
    cfg = IntegratorConfig(tol=1e-9, max_refinements=4)
    assert (cfg.tol, cfg.max_refinements) == (1e-9, 4)


def test_builtin_defaults():
    get_settings.cache_clear()
    settings = get_settings()
    assert IntegratorConfig().tol == settings.INTEGRATOR_TOL
    assert resolve_cutoff() == settings.FOCK_CUTOFF
    assert settings.model_config["env_file"] == ".env"


def test_parser_describes_the_application():
    assert get_settings().APP_TITLE in build_parser().description
