"""Sanity of the brute-force oracle itself, and agreement on the hand toys."""
import pytest

from blackstart import cases
from blackstart.feeder import parse_feeder
from blackstart.planner import solve_plan

import oracle


@pytest.mark.parametrize("build", [cases.toy_two_block, cases.toy_three_block])
def test_oracle_agrees_on_toys(build):
    fd = parse_feeder(build())
    best, tr = oracle.brute_force(fd)
    assert best == pytest.approx(solve_plan(fd).objective, rel=1e-6)
    assert tr.score == best


def test_trajectories_are_legal():
    fd = parse_feeder(cases.toy_four_block())
    kinds = {sw.id: sw.switch for sw in fd.switches}
    trs = oracle.enumerate_trajectories(fd)
    assert trs
    for tr in trs:
        for t in range(1, len(tr.closed)):
            assert tr.closed[t - 1] <= tr.closed[t]
            assert tr.loads_on[t - 1] <= tr.loads_on[t]
            assert tr.live[t - 1] <= tr.live[t]
            for sw in tr.closed[t] - tr.closed[t - 1]:
                a, b = fd.adjacency[sw]
                n = (a in tr.live[t - 1]) + (b in tr.live[t - 1])
                assert n >= 1
                if kinds[sw] == "ESW":
                    assert n == 1


def test_scores_use_clpu_staircase():
    fd = parse_feeder(cases.toy_two_block(steps=4))
    trs = oracle.enumerate_trajectories(fd)
    # nothing switched: only the hard-wired 20 kW load in the source block
    idle = min(trs, key=lambda tr: tr.score)
    assert idle.score == pytest.approx((36 + 28 + 23 + 20) * 0.25)
