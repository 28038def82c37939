"""Closed-form frequency estimates for a 20 MVA grid-forming inverter,
checked against the reduced-order simulation for 1, 2 and 10 MW pickups."""
from blackstart.der import GfmiParams, damping_ratio, lag_for_gamma
from blackstart.validator import verify_frequency_estimates

gfmi = GfmiParams(s_rat=20000.0, c=20000.0, h=4.0, d=1.0, kf=89.0, gamma=0.093)
t_lp = lag_for_gamma(gfmi.h, gfmi.d, gfmi.kf, gfmi.gamma)
_, xi = damping_ratio(gfmi.h, gfmi.d, gfmi.kf, t_lp)
print(f"power-loop lag for gamma={gfmi.gamma}: {t_lp:.5f} s, damping ratio {xi:.3f}")

print(f"{'MW':>4} {'RoCoF sim':>10} {'est':>8} {'nadir sim':>10} {'est':>9} {'QSS sim':>9} {'est':>9} {'worst %':>8}")
for r in verify_frequency_estimates(gfmi, [1000.0, 2000.0, 10000.0]):
    print(f"{r.pickup_kw / 1000:4.0f} {r.measured_rocof:10.4f} {r.estimated_rocof:8.4f} {r.measured_nadir:10.4f} "
          f"{r.estimated_nadir:9.4f} {r.measured_qss:9.4f} {r.estimated_qss:9.4f} {r.worst:8.2f}")
