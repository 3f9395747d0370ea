"""Shared fixtures: memoized systems and fine reference runs, plus the
acceptance summary printed at the end of the session."""

import numpy as np
import pytest

from subdiff.bench import example_problem
from subdiff.fem import assemble, build_mesh
from subdiff.stepping import run_exact

REF_N = 5120

_acceptance_lines = []


def record_acceptance(line: str) -> None:
    _acceptance_lines.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _acceptance_lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def system_store():
    """Assembled FemSystem per (K, c_A), shared across the session."""
    cache = {}

    def get(K: int, c_A: float = 5.0):
        key = (K, c_A)
        if key not in cache:
            cache[key] = assemble(build_mesh(K), c_A)
        return cache[key]

    return get


@pytest.fixture(scope="session")
def reference_store(system_store):
    """Final-time fine-step reference vectors per (example, alpha, K).

    The reference is a direct-solver run with N = 5120 steps (at least 16x
    the largest benchmarked N), kept as a single nodal vector.
    """
    cache = {}

    def get(example: int, alpha: float, K: int, c_A: float = 5.0) -> np.ndarray:
        key = (example, alpha, K, c_A)
        if key not in cache:
            sys = system_store(K, c_A)
            spec = example_problem(example, sys, alpha, REF_N)
            cache[key] = run_exact(spec).final
        return cache[key]

    return get
