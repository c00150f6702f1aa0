import numpy as np
import pytest

from quasilevel.potential import build_star_potential, square_potential


@pytest.fixture(scope="session")
def star5():
    return build_star_potential(5, [1.0])


@pytest.fixture(scope="session")
def square():
    """2cos2πx + 2cos2πy."""
    return square_potential(2.0, 2.0)


@pytest.fixture(scope="session")
def contrast():
    """cos2πx + 2cos2πy: open lines along x for |eps| < 1."""
    return square_potential(1.0, 2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def direct_star(n, amps, x, y, phase=0.0, shift=None):
    """Naive double loop over star vectors and harmonics."""
    total = 0.0
    for k in range(n):
        ex, ey = np.cos(2 * np.pi * k / n), np.sin(2 * np.pi * k / n)
        for h, a in enumerate(amps, start=1):
            extra = 0.0 if shift is None else h * shift[k]
            total += a * np.cos(2 * np.pi * (h * (ex * x + ey * y) + extra) + phase)
    return total


ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line[1])


@pytest.fixture
def criterion(request):
    """Context manager recording one PASS/FAIL line per acceptance criterion."""
    import contextlib

    @contextlib.contextmanager
    def record(number, title):
        detail = {}
        try:
            yield detail
        except BaseException as exc:
            msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
            _emit(request, number, "FAIL", title, detail, msg)
            raise
        _emit(request, number, "PASS", title, detail, "")
    return record


def _emit(request, number, status, title, detail, msg):
    extra = ", ".join(f"{k}={v}" for k, v in detail.items())
    text = f"criterion {number:2d}: {status}  {title}" + (f"  [{extra}]" if extra else "")
    if msg:
        text += f"  ({msg[:160]})"
    print(text)
    request.config.stash[ACCEPTANCE_KEY].append((number, text))
