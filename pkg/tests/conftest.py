import math
import sys

import pytest
from hypothesis import settings

from qmoney.detection import NoiseModel, Source


settings.register_profile("repro", derandomize=True, print_blob=True)
settings.load_profile("repro")


def closed_form_c(mu: float, eta_det: float = 0.25, p_dc: float = 7e-5, purity: float = 0.93, single_photon=False) -> float:
    """Independent scalar oracle: every BB84 state behaves alike in its own basis."""
    f = mu * eta_det if single_photon else 1.0 - math.exp(-mu * eta_det)
    right = min(1.0, p_dc + f * (1 + purity) / 2)
    wrong = min(1.0, p_dc + f * (1 - purity) / 2)
    return right * (1 - wrong) / (1 - (1 - right) * (1 - wrong))


@pytest.fixture
def lab_model() -> NoiseModel:
    return NoiseModel(Source.WEAK_COHERENT, 0.1, 0.25, 7e-5, 0.93)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
