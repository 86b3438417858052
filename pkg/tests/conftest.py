"""Shared fixtures: profile tables and simulation runs reused across modules.

The expensive objects (default profile tables, blow-up runs for all three
equations) are built once per session; every test that needs one gets the
same instance and must treat it as immutable.
"""

import pytest

from cusplab import profiles
from cusplab.sim import (
    InitialDataSpec,
    RunConfig,
    build_initial_data,
    run_to_blowup,
)


@pytest.fixture(scope="session")
def main_table():
    return profiles.build_profile()


@pytest.fixture(scope="session")
def burgers_table():
    return profiles.build_profile(profiles.ProfileParams(), family=profiles.BURGERS_FAMILY)


@pytest.fixture(scope="session")
def hs_seed(main_table):
    return build_initial_data(InitialDataSpec(equation="hs"), table=main_table)


@pytest.fixture(scope="session")
def burgers_seed(burgers_table):
    return build_initial_data(InitialDataSpec(equation="burgers"), table=burgers_table)


@pytest.fixture(scope="session")
def hs_run(hs_seed):
    state, _ = hs_seed
    return run_to_blowup(state, RunConfig(g_stop=1.0e4))


@pytest.fixture(scope="session")
def burgers_run(burgers_seed):
    state, _ = burgers_seed
    return run_to_blowup(state, RunConfig(g_stop=1.0e4))


@pytest.fixture(scope="session")
def ch_run(main_table):
    # gamma != 0 exercises the full nonlocal pressure, including the linear
    # dispersion coupling
    state, _ = build_initial_data(
        InitialDataSpec(equation="ch", epsilon=0.2, gamma=0.5), table=main_table)
    return run_to_blowup(state, RunConfig(g_stop=5.0e4))
