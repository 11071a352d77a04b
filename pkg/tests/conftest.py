import numpy as np
import pytest

from tempnet.config import SimConfig
from tempnet.state import Edges, Population, pair_key


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def small_config(**kw) -> SimConfig:
    cfg = SimConfig(n_target=150, k_groups=3, horizon=60, rng_seed=7)
    cfg.network.spread = 0.02
    cfg.network.amplitude = 0.2
    for k, v in kw.items():
        setattr(cfg, k, v)
    return cfg.validate()


def graph(n, pairs, **node_values):
    """Population of n nodes with the given undirected edges (row pairs)."""
    pop = Population()
    pop.append(n, **node_values)
    e = Edges()
    if pairs:
        a = np.array([min(p) for p in pairs])
        b = np.array([max(p) for p in pairs])
        e.add(a, b, pair_key(pop.ids[a], pop.ids[b]), 0)
    return pop, e


ACCEPTANCE_LINES: list[str] = []


def report(criterion: int, name: str, passed: bool, detail: str) -> bool:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion:>2} {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
