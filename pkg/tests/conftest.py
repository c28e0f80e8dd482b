import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def signed_perm_distance(g):
    """Largest entrywise gap between |g| and the nearest permutation matrix."""
    g = np.abs(np.asarray(g))
    p = np.zeros_like(g)
    p[np.arange(len(g)), np.argmax(g, axis=1)] = 1.0
    if not np.array_equal(p.sum(axis=0), np.ones(len(g))):
        return np.inf
    return float(np.max(np.abs(g - p)))


def random_orthogonal(p, rng):
    q, r = np.linalg.qr(rng.standard_normal((p, p)))
    return q * np.sign(np.diag(r))


ACCEPTANCE_LINES = []


def report_criterion(number, passed, detail):
    """Record (and print) one acceptance line; shown again in the summary."""
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
