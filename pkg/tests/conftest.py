from pathlib import Path

import numpy as np
import pytest

from mvlstm.data import SeriesFrame

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir():
    return FIXTURES


def toy_frame(n_rows, n_vars=3, seed=0):
    rng = np.random.default_rng(seed)
    names = [f"x{k + 1}" for k in range(n_vars - 1)] + ["y"]
    return SeriesFrame(names, rng.normal(size=(n_rows, n_vars)))


@pytest.fixture
def frame_factory():
    return toy_frame


ACCEPTANCE = []


@pytest.fixture
def verdict():
    """Record one acceptance line: ``verdict(number, ok, detail)``."""
    def _record(number, ok, detail):
        ACCEPTANCE.append((number, bool(ok), detail))
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
