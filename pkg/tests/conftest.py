import math

import pytest
from hypothesis import HealthCheck, settings

from conley_resonance.quadrature import default_grid
from conley_resonance.spectral import ConstantsBundle, build_laplacian_1d, decompose

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def es32():
    return build_laplacian_1d(32, math.pi)


@pytest.fixture(scope="session")
def d2(es32):
    return decompose(es32, 2)


@pytest.fixture(scope="session")
def grid32():
    return default_grid(math.pi, 32)


@pytest.fixture(scope="session")
def cb2(d2):
    return ConstantsBundle.for_decomposition(d2)


# --- acceptance summary -------------------------------------------------------

_ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when != "call":
        return
    number, title = mark.args
    detail = ""
    if rep.failed:
        detail = str(rep.longrepr.reprcrash.message).splitlines()[0] if hasattr(rep.longrepr, "reprcrash") else "failed"
    _ACCEPTANCE[number] = (title, "PASS" if rep.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, status, detail = _ACCEPTANCE[number]
        line = f"[{status}] {number:>2}. {title}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
