import sys

import numpy as np
import pytest

from invariance_lab.signal import Grid, Signal


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_signal(rng, n, complex_valued=True, name="u"):
    v = rng.standard_normal(n)
    if complex_valued:
        v = v + 1j * rng.standard_normal(n)
    return Signal(Grid.line(n, name), v)


def random_layer(rng, n, channels, complex_valued=True):
    v = rng.standard_normal((n, channels))
    if complex_valued:
        v = v + 1j * rng.standard_normal((n, channels))
    return Signal.from_array(v, ["u", "lambda1"], ["spatial", "channel"])


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
