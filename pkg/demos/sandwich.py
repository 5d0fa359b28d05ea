"""Comparison systems bracket the Q-learning ODE.

Run with ``python demos/sandwich.py [--svg out.svg]``.  Integrates the
original, upper and lower systems from a common start and reports how far
each is from the origin along the way.
"""
import argparse

import numpy as np

from qswitch import cases
from qswitch.harness import verify_sandwich

parser = argparse.ArgumentParser()
parser.add_argument("--svg", default=None, help="write a plot of the first coordinate")
parser.add_argument("--t-final", type=float, default=100.0)
args = parser.parse_args()

mdp = cases.figure_mdp()
for variant in ("q", "avg"):
    res = verify_sandwich(variant, mdp, t_final=args.t_final, delta=1.0)
    print(f"{variant}: sandwich {res.verdict} (lower violation {res.max_lower_violation:.2e}, upper {res.max_upper_violation:.2e})")
    for name, traj in res.trajectories.items():
        norms = np.abs(traj.states).max(axis=1)
        marks = [norms[int(f * (len(norms) - 1))] for f in (0.0, 0.1, 0.5, 1.0)]
        print(f"   {name:8s} ||x||_inf at t = 0, 10%, 50%, 100%:", np.round(marks, 4))

# convergence toward the origin is slow: the slowest mode decays like exp(-d_min (1 - gamma) t)
print("\nslowest tabular rate d_min (1 - gamma) =", round(mdp.dist.min() * (1 - mdp.gamma), 4))

if args.svg:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    res = verify_sandwich("q", mdp, t_final=args.t_final)
    fig, ax = plt.subplots()
    for name, traj in res.trajectories.items():
        ax.plot(traj.times, traj.states[:, 0], label=name)
    ax.set_xlabel("t")
    ax.set_ylabel("x_1")
    ax.legend()
    fig.savefig(args.svg)
    print("wrote", args.svg)
