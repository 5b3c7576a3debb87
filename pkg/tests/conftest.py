import os
import tempfile

import numpy as np
import pytest

# keep reference caches out of the user's home unless a location is given
if "DIRAC_FD_CACHE" not in os.environ:
    os.environ["DIRAC_FD_CACHE"] = os.path.join(tempfile.gettempdir(), "dirac_fd_test_cache")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_field(rng, M):
    return rng.standard_normal((M, 2)) + 1j * rng.standard_normal((M, 2))


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:<4g} {'PASS' if ok else 'FAIL'}  {detail}")
