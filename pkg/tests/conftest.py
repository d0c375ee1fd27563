from __future__ import annotations

import os

import numpy as np
import pytest

from basketio import codec


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def session():
    return codec.CodecSession()


def random_events(rng, n, max_len=5000, compressible=True):
    """Variable-length events; half of them are repetitive so codecs have work to do."""
    out = []
    for _ in range(n):
        size = int(rng.integers(1, max_len))
        if compressible and rng.random() < 0.5:
            unit = rng.bytes(int(rng.integers(1, 16)))
            out.append((unit * (size // len(unit) + 1))[:size])
        else:
            out.append(rng.bytes(size))
    return out


@pytest.fixture
def tmp_file(tmp_path):
    def make(name="f.bin", data: bytes | None = None):
        p = tmp_path / name
        if data is not None:
            p.write_bytes(data)
        return os.fspath(p)
    return make


_ACCEPTANCE: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance line; shown again in the terminal summary."""
    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        print(line)
        _ACCEPTANCE.append(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
