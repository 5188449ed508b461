import pytest
from hypothesis import settings

from lagflow import flow, scenario

settings.register_profile("lagflow", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("lagflow")


class RunCache:
    """Bundled scenarios integrated once per session."""

    def __init__(self):
        self._runs = {}

    def __call__(self, name):
        if name not in self._runs:
            scn = scenario.load_scenario(name)
            config = scenario.build(scn)
            centres = scenario.auto_centers(config) if scn.tracked_centers == "auto" else scn.tracked_centers
            trace = flow.run(config, scn.flow, scn.tracked_cycles, centres)
            self._runs[name] = (config, trace)
        return self._runs[name]


@pytest.fixture(scope="session")
def bundled():
    return RunCache()
