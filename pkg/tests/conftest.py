"""Shared scenario fixtures.

`table2_config` / `table3_config` correspond to the two reference parameter
sets (moment comparison with clamps [0.1, 100]; ruin evaluation with clamps
[0.001, 1000] and 5% interest).  Durations are the calibrated single-slot
model throughout.
"""

from dataclasses import replace

import pytest

from microruin.model import (
    DurationModel,
    FinancialParams,
    NetworkParams,
    ScenarioConfig,
    validate,
)


def make_config(alpha=4.0, beta=0.1, c_min=0.1, c_max=100.0, rate_gap=100.0,
                r=0.05, **numerics_over):
    from microruin.model import Numerics, ProductParams
    cfg = ScenarioConfig(
        network=NetworkParams(beta_cells_per_area=beta, alpha_pathloss=alpha),
        financial=FinancialParams(c_min=c_min, c_max=c_max,
                                  interest_rate_per_interval=r),
        products=ProductParams(rate_gaps=(rate_gap,), product_mix=(1.0,)),
        durations=DurationModel(kind="deterministic", tau=1, mean=None, tau_max=None),
        numerics=Numerics(**numerics_over) if numerics_over else Numerics(),
    )
    return validate(cfg)


@pytest.fixture
def table2_config():
    return make_config(alpha=3.0, c_min=0.1, c_max=100.0)


@pytest.fixture
def table3_config():
    return make_config(alpha=4.0, c_min=0.001, c_max=1000.0)


@pytest.fixture
def fast_plan():
    from microruin import montecarlo
    return montecarlo.SimulationPlan(seed=7, n_users=20_000, n_paths=2_000)


def pytest_terminal_summary(terminalreporter):
    """Echo the one-line-per-criterion acceptance results in every run."""
    import sys
    module = (sys.modules.get("test_acceptance")
              or sys.modules.get("tests.test_acceptance"))
    if module is not None and getattr(module, "RESULTS", None):
        terminalreporter.section("acceptance criteria")
        for line in module.RESULTS:
            terminalreporter.write_line(line)
