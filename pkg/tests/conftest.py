import time

import pytest

from gdtm.config import ExperimentConfig, parse_config
from gdtm.experiments import build_system, generate_episodes, train_from_config

ACCEPTANCE_LINES = []

TWO_TYPE_CONFIG = """
[system]
dof = 10
stiffness = 2.4e5, 1.2e5
damping = 2500, 1250
spring_types = 0, 1
[model]
kind = {kind}
"""


def record_criterion(number, passed, detail):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


class Trained:
    """A trained surrogate with its data, split and wall-clock cost."""

    def __init__(self, config):
        self.config = config
        start = time.perf_counter()
        self.system, self.graph = build_system(config.system)
        self.specs, self.records = generate_episodes(config, self.system)
        self.model, self.history, self.split, self.adj = train_from_config(
            config, self.specs, self.records, self.graph)
        self.seconds = time.perf_counter() - start

    @property
    def test_records(self):
        return [self.records[i] for i in self.split.test]


@pytest.fixture(scope="session")
def baseline():
    return Trained(ExperimentConfig())


@pytest.fixture(scope="session")
def two_type_gat():
    return Trained(parse_config(TWO_TYPE_CONFIG.format(kind="gat")))


@pytest.fixture(scope="session")
def two_type_heterogeneous():
    return Trained(parse_config(TWO_TYPE_CONFIG.format(kind="heterogeneous")))
