import numpy as np
import pytest

from ablmini.grid import build_grid


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_grid():
    return build_grid(8, 8, 8, 1.0, 1.0, 1.0)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE

    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[n]
        verdicts = {p[1] for p in parts}
        if False in verdicts:
            status = "FAIL"
        elif True in verdicts:
            status = "PASS" if None not in verdicts else "PASS (partial)"
        else:
            status = "SKIP"
        detail = "; ".join(f"{part}: {'pass' if ok else 'skip' if ok is None else 'FAIL'}"
                           f"{' (' + d + ')' if d else ''}" for part, ok, d in parts)
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {detail}")
