import numpy as np
import pytest

from qfbcool.systems import build_heisenberg_preset, build_qutrit_preset


@pytest.fixture(scope="session")
def qutrit():
    return build_qutrit_preset()


@pytest.fixture(scope="session")
def heisenberg():
    return build_heisenberg_preset()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_hermitian(n, rng, scale=1.0):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * (a + a.conj().T) / 2


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record a one-line verdict for an acceptance criterion (echoed in the terminal summary)."""

    def _report(number, name, passed, detail=""):
        line = f"criterion {number:>2} {name}: {'PASS' if passed else 'FAIL'}" + (f" ({detail})" if detail else "")
        print(line)
        _ACCEPTANCE_LINES.append(line)
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
