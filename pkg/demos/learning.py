"""Stochastic runs of the three algorithms against their exact fixed points.

Run with ``python demos/learning.py``.  Each run samples i.i.d. state-action
pairs from the stationary distribution and logs the max-norm error on a
logarithmic grid of iterations.
"""
from qswitch import cases
from qswitch.linear_fa import solve_theta_star
from qswitch.mdp import solve_q_star
from qswitch.qlearn import StepSizeSchedule, run

ITERS = 200_000
fig = cases.figure_mdp()
q_star = solve_q_star(fig)
print("Q* =", q_star.round(4))

for label, sched in (("alpha = 1/(k+1)", StepSizeSchedule(1.0, 0.0, 1.0)), ("alpha = 10/(k+11)^0.8", StepSizeSchedule(10.0, 10.0, 0.8))):
    print("\nschedule", label)
    for alg in ("q", "avgq"):
        rec = run(alg, fig, q_star, iterations=ITERS, seed=0, schedule=sched)
        print(f"  {alg:5s} error after {ITERS} steps: {rec.final_error:.4f}")
    for name, mdp, phi in (("melo", cases.melo_mdp(), cases.melo_features()), ("binary", cases.binary_feature_mdp(), cases.binary_features())):
        theta = solve_theta_star(mdp, phi)
        rec = run("lfa", mdp, theta, iterations=ITERS, seed=0, schedule=sched, phi=phi)
        print(f"  lfa on {name:6s} theta* = {theta.round(4)}, error {rec.final_error:.4f}")

# a log of the error curve for one run
rec = run("q", fig, q_star, iterations=ITERS, seed=1, schedule=StepSizeSchedule(10.0, 10.0, 0.8))
for k, e in list(zip(rec.log_k, rec.errors))[::10]:
    print(f"k={k:>7d}  error={e:.4f}")
