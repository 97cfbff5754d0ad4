import numpy as np
import pytest

from pulsefield.point_process import ModelParams, Realization, sample_realization


def make_real(b, x, c=None, alpha=0.5, eta=0.5, j_max=10, kind="hat", **kw):
    """Realization from explicit pulse parameters (c defaults to 1, 2, 3, ...)."""
    b = np.asarray(b, dtype=np.float64)
    c = np.arange(1, b.size + 1, dtype=np.float64) if c is None else np.asarray(c, dtype=np.float64)
    params = ModelParams(alpha, eta, pulse_kind=kind, j_max=j_max, **kw)
    return Realization.from_arrays(params, c, b, np.asarray(x, dtype=np.float64))


@pytest.fixture(scope="session")
def real_small():
    return sample_realization(ModelParams(0.5, 0.5, seed=7, j_max=12))


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def record(n: int, passed: bool, detail: str) -> None:
    line = f"criterion {n:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE[n] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
