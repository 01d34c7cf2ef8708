import sys
from pathlib import Path

import numpy as np
import pytest

from opfproxy.netcase import build_dc_model, bundled_case_path, load_case

sys.path.insert(0, str(Path(__file__).parent))

# Filled by test_acceptance.py: criterion number -> (passed, detail).
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def case2():
    return load_case(bundled_case_path("case2"))


@pytest.fixture(scope="session")
def case3():
    return load_case(bundled_case_path("case3"))


@pytest.fixture(scope="session")
def case5():
    return load_case(bundled_case_path("case5"))


@pytest.fixture(scope="session")
def model2(case2):
    return build_dc_model(case2)


@pytest.fixture(scope="session")
def model3(case3):
    return build_dc_model(case3)


@pytest.fixture(scope="session")
def model5(case5):
    return build_dc_model(case5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
