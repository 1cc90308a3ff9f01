import pytest

from frcom.fixtures import complete_graph, cycle_graph, grid_graph, path_graph


@pytest.fixture(scope="session")
def p3():
    return path_graph(3)


@pytest.fixture(scope="session")
def c4():
    return cycle_graph(4)


@pytest.fixture(scope="session")
def k4():
    return complete_graph(4)


@pytest.fixture(scope="session")
def grid23():
    return grid_graph(2, 3)


@pytest.fixture(scope="session")
def grid33():
    return grid_graph(3, 3)


@pytest.fixture(scope="session")
def grid44():
    return grid_graph(4, 4)
