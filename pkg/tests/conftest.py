import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from birdsdm.synthetic import SyntheticWorldSpec, generate_synthetic_world

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_world(tmp_path_factory):
    """A 60-hotspot synthetic world on disk."""
    out = tmp_path_factory.mktemp("world")
    spec = SyntheticWorldSpec(n_hotspots=60, n_species=12, n_regions=3, patch_size=8, env_patch_size=2,
                              range_fraction=0.5, seed=3)
    return generate_synthetic_world(spec, out)


_ACCEPTANCE = []


@pytest.fixture
def acceptance_log():
    """Collects one line per acceptance criterion for the terminal summary."""

    def record(number, name, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {name} ({detail})"
        _ACCEPTANCE.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
