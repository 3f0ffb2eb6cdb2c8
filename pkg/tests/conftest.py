import os

import numpy as np
import pytest

# keep BLAS single-threaded inside tests; study drivers parallelize at the
# replicate level instead
os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")

_ACCEPTANCE_RESULTS = []


def record_acceptance(criterion, passed, detail=""):
    _ACCEPTANCE_RESULTS.append((criterion, passed, detail))
    line = f"ACCEPTANCE {criterion}: {'PASS' if passed else 'FAIL'}" + (
        f"  ({detail})" if detail else ""
    )
    print(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in sorted(_ACCEPTANCE_RESULTS):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{status}  {criterion}" + (f"  {detail}" if detail else ""))


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
