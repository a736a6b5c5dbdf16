from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lrlab.dsl import build_instance, parse_presentation  # noqa: E402
from lrlab.presets import EXAMPLE1, EXAMPLE1_GF2, EXAMPLE2  # noqa: E402


def instance(text: str):
    return build_instance(parse_presentation(text))


def verified(text: str):
    """An instance whose bracket has passed ``verify_jacobi``."""
    from lrlab.jacobi import verify_jacobi

    inst = instance(text)
    assert verify_jacobi(inst.bracket).passed
    return inst


@pytest.fixture(scope="session")
def ex1():
    return verified(EXAMPLE1)


@pytest.fixture(scope="session")
def ex1_gf2():
    return verified(EXAMPLE1_GF2)


@pytest.fixture(scope="session")
def ex2():
    return verified(EXAMPLE2)


@pytest.fixture(scope="session")
def ex2_tensor(ex2):
    from lrlab.lie_rinehart import tensor_square

    return tensor_square(ex2.algebra, ex2.bracket)


@pytest.fixture(scope="session")
def ex2_ah(ex2):
    from lrlab.lie_rinehart import ah_tensor_module

    return ah_tensor_module(ex2.algebra, ex2.bracket, ex2.h)


@pytest.fixture(scope="session")
def ex2_jet(ex2):
    from lrlab.lie_rinehart import jet_module

    return jet_module(ex2.algebra, ex2.bracket)


@pytest.fixture(scope="session")
def ex1_tensor(ex1):
    from lrlab.lie_rinehart import tensor_square

    return tensor_square(ex1.algebra, ex1.bracket)


@pytest.fixture(scope="session")
def ex1_ah(ex1):
    from lrlab.lie_rinehart import ah_tensor_module

    return ah_tensor_module(ex1.algebra, ex1.bracket, ex1.h)


@pytest.fixture(scope="session")
def ex1_jet(ex1):
    from lrlab.lie_rinehart import jet_module

    return jet_module(ex1.algebra, ex1.bracket)


# -- acceptance reporting ------------------------------------------------------------

def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion covered by the test")
    config._criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (rep.when != "call" and not rep.failed):
        return
    results = item.config._criteria
    n = marker.args[0]
    results[n] = results.get(n, True) and rep.passed


def pytest_terminal_summary(terminalreporter, config):
    results = getattr(config, "_criteria", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(f"criterion {n}: {'PASS' if results[n] else 'FAIL'}")
