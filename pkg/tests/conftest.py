import re

import numpy as np
import pytest

from dpbeta.graph import Graph


def random_graph(p: int, rng: np.random.Generator, density: float = 0.5) -> Graph:
    upper = rng.random(p * (p - 1) // 2) < density
    return Graph.from_upper(p, upper)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for key in ("passed", "failed", "skipped"):
        for rep in terminalreporter.stats.get(key, []):
            lines += [v for n, v in getattr(rep, "user_properties", []) if n == "acceptance"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(set(lines), key=lambda l: int(re.search(r"C(\d+)", l).group(1))):
            terminalreporter.write_line(line)
