import numpy as np
import pytest

from advmc.models.chain import Dtmc
from advmc.services.case_studies import gridworld_fig4, simple_protocol

FOUR_STATE_ROWS = [
    [0.0, 0.6, 0.4, 0.0],
    [0.1, 0.1, 0.0, 0.8],
    [0.3, 0.0, 0.0, 0.7],
    [0.0, 0.0, 0.0, 1.0],
]


@pytest.fixture
def four_state() -> Dtmc:
    return Dtmc.from_dense(FOUR_STATE_ROWS, init=0)


@pytest.fixture
def protocol() -> Dtmc:
    return simple_protocol()


@pytest.fixture
def grid() -> Dtmc:
    return gridworld_fig4()


def enumerate_until(matrix, start, lhs, rhs, bound) -> float:
    """Path-enumeration oracle for lhs U<=bound rhs"""
    matrix = np.asarray(matrix)
    n = matrix.shape[0]
    total = 0.0
    frontier = {(start,): 1.0}
    for depth in range(bound + 1):
        next_frontier = {}
        for path, weight in frontier.items():
            s = path[-1]
            if rhs[s]:
                total += weight
                continue
            if not lhs[s] or depth == bound:
                continue
            for t in range(n):
                if matrix[s, t] > 0:
                    next_frontier[path + (t,)] = weight * matrix[s, t]
        frontier = next_frontier
    return total


@pytest.fixture
def until_oracle():
    return enumerate_until
