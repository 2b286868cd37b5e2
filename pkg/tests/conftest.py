import functools

import numpy as np
import pytest

from ditrecon import forward_radon, make_phantom

_ACCEPTANCE: dict[int, str] = {}


def record(number: int, ok: bool, detail: str) -> None:
    """Register a criterion outcome for the end-of-run summary."""
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    _ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[n])


@functools.lru_cache(maxsize=None)
def phantom(kind: str, size: int = 512):
    return make_phantom(kind, size)


@functools.lru_cache(maxsize=None)
def sinogram(kind: str, angles: int, size: int = 512):
    return forward_radon(phantom(kind, size), angles)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
