import numpy as np
import pytest

from aflab.grid import GeometryConfig, build_geometry

ACCEPTANCE = {}


def record(number, passed, summary):
    ACCEPTANCE[number] = (bool(passed), summary)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, summary = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {summary}")


def geometry(preset, n=32, **kw):
    return build_geometry(GeometryConfig(preset, nx=n, ny=n, **kw))


@pytest.fixture
def bump16():
    return geometry("synthetic-bump", 16, bump_amplitude=10.0)


@pytest.fixture
def bump32():
    return geometry("synthetic-bump", 32, bump_amplitude=10.0)


@pytest.fixture
def flat32():
    return geometry("flat-zero", 32)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
