"""Three-block toy: two grid-forming inverters, one synchronizing switch.

The far load needs both inverters' phase capacity, so the optimal plan
synchronizes the two islands first and only then picks it up. With
synchronization ruled out the load stays dark.
"""
from blackstart import cases
from blackstart.feeder import parse_feeder
from blackstart.planner import PlanningConfig, solve_plan
from blackstart.validator import validate_plan

feeder = parse_feeder(cases.toy_three_block())

for mode in ("optimal", "rule_based"):
    plan = solve_plan(feeder, PlanningConfig(sync_mode=mode))
    rep = validate_plan(feeder, plan)
    print(f"\n{mode}: {plan.objective:.3f} kWh served, validator {rep.verdict}")
    for st in plan.steps[1:]:
        moves = ", ".join(f"{c.switch}{' (sync)' if c.sync else ''}" for c in st.closures) or "-"
        served = sum(st.load_kw.values())
        print(f"  t={st.t}  close {moves:<16} blocks {','.join(st.blocks_on):<10} load {served:7.2f} kW")
