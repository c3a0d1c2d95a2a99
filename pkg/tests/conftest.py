import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("ldtail", max_examples=40, deadline=None)
settings.load_profile("ldtail")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# criterion -> list of (part ok, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[2:])):
        parts = ACCEPTANCE[key]
        status = "PASS" if all(ok for ok, _ in parts) else "FAIL"
        terminalreporter.write_line(f"{key} {status}: " + "; ".join(d for _, d in parts))
