import pytest

from presence_forecast import sim
from presence_forecast.config import EngineConfig
from presence_forecast.engine import Snapshot
from presence_forecast.store import Store, resolve_annotations

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def default_sim():
    """180 simulated days for the default profile: (profile, events, appointments, truth)."""
    profile = sim.default_profile()
    events, appts, truth = sim.generate_user(profile, 180)
    return profile, events, appts, truth


@pytest.fixture(scope="session")
def default_snapshot(default_sim):
    profile, events, appts, truth = default_sim
    users = {profile.user: (events, appts, resolve_annotations(truth.annotations()))}
    return Snapshot.from_memory(EngineConfig(), users, profile.devices, profile.directory)


@pytest.fixture(scope="session")
def sim_store(tmp_path_factory):
    """A 60-day simulated store on disk."""
    root = tmp_path_factory.mktemp("store")
    profile = sim.default_profile()
    events, appts, truth = sim.generate_user(profile, 60)
    sim.write_store(Store(root), profile, events, appts, truth)
    return root
