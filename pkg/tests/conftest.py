import numpy as np
import pytest

from sctoeplitz.bergman import WhitneyQuadrature
from sctoeplitz.geometry import l_shape, random_star_polygon, unit_square, whitney_decompose
from sctoeplitz.scmap import ConformalMap, corner_domain

# A random 7-gon with two reentrant corners; the seed is fixed so that the
# tests see the same domain every run.
RANDOM_SEED = 5


@pytest.fixture(scope="session")
def square():
    return unit_square()


@pytest.fixture(scope="session")
def lshape():
    return l_shape()


@pytest.fixture(scope="session")
def heptagon():
    return random_star_polygon(7, RANDOM_SEED)


@pytest.fixture(scope="session")
def square_map(square):
    return ConformalMap(square)


@pytest.fixture(scope="session")
def lshape_map(lshape):
    return ConformalMap(lshape)


@pytest.fixture(scope="session")
def heptagon_map(heptagon):
    return ConformalMap(heptagon)


@pytest.fixture(scope="session")
def square_quad8(square, square_map):
    return WhitneyQuadrature(square_map, whitney_decompose(square, 8))


@pytest.fixture(scope="session")
def square_quad5(square, square_map):
    return WhitneyQuadrature(square_map, whitney_decompose(square, 5))


@pytest.fixture(scope="session")
def corner18():
    return corner_domain(1.8)


@pytest.fixture(scope="session")
def corner19():
    return corner_domain(1.9)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# -- acceptance reporting -----------------------------------------------------------------

_CRITERIA: dict[int, tuple[str, str, str]] = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    number, title = marker.args
    detail = next((v for k, v in item.user_properties if k == "detail"), "")
    status = "PASS" if call.excinfo is None else "FAIL"
    prev = _CRITERIA.get(number)
    if prev is None or prev[0] == "PASS":
        _CRITERIA[number] = (status, title, str(detail))
    print(f"\nCRITERION {number:>2} {status}: {title} {detail}".rstrip())


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_CRITERIA):
        status, title, detail = _CRITERIA[number]
        terminalreporter.write_line(f"CRITERION {number:>2} {status}: {title}" + (f" [{detail}]" if detail else ""))
