import numpy as np
import pytest

from fsifem import analysis, fem, mesh as meshmod, solver


@pytest.fixture(scope="session")
def mesh0():
    return meshmod.generate(0)


@pytest.fixture(scope="session")
def mesh1():
    return meshmod.generate(1)


@pytest.fixture(scope="session")
def space0(mesh0):
    return fem.build_space(mesh0)


@pytest.fixture(scope="session")
def space1(mesh1):
    return fem.build_space(mesh1)


@pytest.fixture(scope="session")
def params():
    return fem.MaterialParams(lame_lambda=1.0, lame_mu=1.0, shift=1.0)


@pytest.fixture(scope="session")
def case():
    return analysis.manufactured_case(1.0)


@pytest.fixture(scope="session")
def solved1(space1, params, case):
    """Level-1 manufactured solve shared across test modules."""
    data = analysis.manufactured_data(space1, case)
    state, report = solver.solve_resolvent(space1, params, data)
    return space1, data, state, report


@pytest.fixture()
def rng():
    return np.random.default_rng(20240915)
