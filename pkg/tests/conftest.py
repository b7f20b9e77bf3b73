import numpy as np
import pytest

from grasp.image import ImageTensor


def rel_err(a, b):
    a = getattr(a, "data", a)
    b = getattr(b, "data", b)
    return float(np.linalg.norm(np.ravel(a) - np.ravel(b)) / max(np.linalg.norm(np.ravel(b)), 1e-300))


def vec(*values):
    """A 1 x N x 1 tensor, handy for small vector examples."""
    return ImageTensor(np.array(values, dtype=float).reshape(1, -1, 1))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def random_image(rng):
    def make(h=8, w=8, c=3, lo=0.0, hi=1.0):
        return ImageTensor(rng.uniform(lo, hi, size=(h, w, c)))
    return make


# acceptance results, printed once at the end of the run
CRITERIA: dict[int, tuple[bool, str]] = {}


def record_criterion(number: int, ok: bool, detail: str):
    CRITERIA[number] = (bool(ok), detail)
    print(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        ok, detail = CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
