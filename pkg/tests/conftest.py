import numpy as np
import pytest

from evfb.evstream import EventStream

ACCEPTANCE_LINES = []


def random_stream(seed, n=1000, width=32, height=24, span_us=1_000_000, labeled=True):
    """Sorted random events; small sensors and spans keep neighbourhoods busy."""
    rng = np.random.default_rng(seed)
    t = np.sort(rng.integers(0, span_us, n))
    x = rng.integers(0, width, n)
    y = rng.integers(0, height, n)
    p = rng.choice([-1, 1], n)
    label = rng.integers(0, 4, n) if labeled else None
    return EventStream(width, height, t, x, y, p, label)


def record_acceptance(name, passed, detail):
    ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def benchmark():
    """The 10-scene, 30 s, 1280x720 synthetic benchmark."""
    from evfb.bench import synthetic_dataset
    return synthetic_dataset(10, seed=0)


@pytest.fixture(scope="session")
def benchmark_split(benchmark):
    from evfb.feast import split_recordings
    return split_recordings(benchmark, seed=0)
