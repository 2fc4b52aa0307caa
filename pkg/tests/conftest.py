import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rtm.physics import PhysicalParams, to_scaled  # noqa: E402
from rtm.spectrum import Spectrum  # noqa: E402
from rtm.wavepacket import make_gaussian, project  # noqa: E402


@pytest.fixture(scope="session")
def cs_params():
    return PhysicalParams.preset("cs")


@pytest.fixture(scope="session")
def spectrum400():
    return Spectrum.triangular(400)


@pytest.fixture(scope="session")
def cs_packet(cs_params):
    z0 = float(to_scaled(20.1e-6, "length", cs_params))
    width = float(to_scaled(0.28e-6, "length", cs_params))
    return make_gaussian(z0, width)


@pytest.fixture(scope="session")
def cs_coeffs(cs_packet, spectrum400):
    return project(cs_packet, spectrum400)


#: (criterion, passed, detail) lines recorded by tests/test_acceptance.py
ACCEPTANCE_LINES: list[tuple[int, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
