import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from blackstart import cases  # noqa: E402
from blackstart.der import GfmiParams  # noqa: E402
from blackstart.feeder import parse_feeder  # noqa: E402
from blackstart.planner import PlanInfeasible, PlanningConfig, solve_plan  # noqa: E402

# S = 20 MVA recovered from the QSS droop of the verification table; (H, D, Kf, gamma) as published
FREQ = GfmiParams(s_rat=20000.0, c=20000.0, h=4.0, d=1.0, kf=89.0, gamma=0.093)

RANDOM_SEEDS = range(12)


@pytest.fixture(scope="session")
def freq_params():
    return FREQ


@pytest.fixture
def toy2():
    return parse_feeder(cases.toy_two_block())


@pytest.fixture
def toy3():
    return parse_feeder(cases.toy_three_block())


@pytest.fixture
def toy4():
    return parse_feeder(cases.toy_four_block())


def _solve_all():
    out = []
    docs = [("toy2", cases.toy_two_block()), ("toy3", cases.toy_three_block()), ("toy4", cases.toy_four_block()),
            ("toy3tg", cases.toy_three_block_tg())]
    docs += [(f"random{s}", cases.random_toy(s)) for s in RANDOM_SEEDS]
    for name, doc in docs:
        fd = parse_feeder(doc)
        for mode in ("optimal", "rule_based"):
            try:
                plan = solve_plan(fd, PlanningConfig(sync_mode=mode))
            except PlanInfeasible:
                continue
            out.append((f"{name}/{mode}", fd, plan))
    return out


@pytest.fixture(scope="session")
def solved_plans():
    """(label, feeder, plan) for every toy in both synchronizing settings."""
    return _solve_all()


def pytest_terminal_summary(terminalreporter):
    gate = sys.modules.get("test_acceptance")
    if gate is None or not gate.RESULTS:
        return
    terminalreporter.section("acceptance")
    for cid in gate.CRITERIA:
        if cid in gate.RESULTS:
            terminalreporter.write_line(gate.RESULTS[cid])
        else:
            terminalreporter.write_line(f"{cid} NOT RUN")
