import mpmath
import numpy as np
import pytest

from attacal.core import Dataset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def mp_softmax(z, dps=50):
    """High-precision softmax used as an independent oracle."""
    with mpmath.workdps(dps):
        e = [mpmath.exp(mpmath.mpf(float(v))) for v in z]
        s = mpmath.fsum(e)
        return np.array([float(v / s) for v in e])


def random_probs(rng, n, k, sharpness=2.0):
    z = sharpness * rng.standard_normal((n, k))
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def random_dataset(rng, n, k, m, scale=2.0):
    p0 = random_probs(rng, n, k)
    z = scale * rng.standard_normal((n, m, k))
    labels = rng.integers(0, k, size=n)
    return Dataset(p0, z, labels)


ACCEPTANCE_RESULTS = []


def record_criterion(number, title, ok, detail=""):
    ACCEPTANCE_RESULTS.append((number, title, bool(ok), detail))
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(ACCEPTANCE_RESULTS):
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{status}] {number:2d}. {title}: {detail}")
