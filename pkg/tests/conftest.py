import numpy as np
import pytest


@pytest.fixture(autouse=True)
def _isolated_cache(tmp_path_factory, monkeypatch):
    monkeypatch.setenv("WAVELEARN_CACHE", str(tmp_path_factory.getbasetemp() / "e_cache"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_coeffs(rng, S):
    return rng.normal(size=2 * S + 1) + 1j * rng.normal(size=2 * S + 1)


def midpoint(fn, a, b, n):
    """Midpoint rule for ``fn`` vectorized over a 1-D grid."""
    h = (b - a) / n
    x = a + (np.arange(n) + 0.5) * h
    return np.sum(fn(x), axis=-1) * h


# -- acceptance summary --------------------------------------------------------------------
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance(request):
    """``record(criterion, passed, detail)`` — collects one summary line per criterion."""

    def record(criterion: int, passed: bool, detail: str) -> bool:
        line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'} — {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
