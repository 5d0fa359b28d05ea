"""Stability certificates for the three switched models.

Run with ``python demos/certificates.py``.  Prints the per-mode margins for
tabular Q-learning, averaging Q-learning and the linear-feature examples, and
contrasts the row-dominance condition with Melo's eigenvalue condition.
"""
import numpy as np

from qswitch import cases
from qswitch.linear_fa import enumerate_theta_phi
from qswitch.stability import check_averaging, check_lfa_new_condition, check_melo_condition, check_qlearning

mdp = cases.figure_mdp()
print("state-action distribution d =", mdp.dist)

# every tabular mode has margin d_i (gamma - 1): the certificate does not depend on the policy
rep = check_qlearning(mdp)
print("\ntabular Q-learning:", rep.verdict, "worst margin", round(rep.worst_margin, 4))
print("  d (gamma - 1) =", mdp.dist * (mdp.gamma - 1))

for delta in (0.1, 1.0, 10.0):
    rep = check_averaging(mdp, delta)
    print(f"averaging, delta={delta:5}: {rep.verdict}, worst margin {rep.worst_margin:.4f}, L = {rep.transform}")

# binary features: diagonal + off-diagonal row sums for each greedy policy
mdp_b, phi_b = cases.binary_feature_mdp(), cases.binary_features()
rep = check_lfa_new_condition(mdp_b, phi_b)
print("\nbinary features, new condition:", rep.verdict)
for m in rep.per_mode:
    print("  policy", m.policy, "diag", m.diagonal.round(4), "off", m.off_diagonal.round(4), "margin", m.margins.round(4))

# the Melo example: Melo's condition rejects, the row-dominance condition accepts
mdp_m, phi_m = cases.melo_mdp(), cases.melo_features()
theta_phi = enumerate_theta_phi(mdp_m, phi_m)
melo = check_melo_condition(mdp_m, phi_m, theta_phi)
new = check_lfa_new_condition(mdp_m, phi_m, theta_phi)
print("\nMelo example, greedy-realizable policies:", theta_phi)
print("  Melo quantity per policy:", [float(np.round(m.margins[0], 4)) for m in melo.per_mode], "->", melo.verdict)
print("  new-condition margins:  ", [float(np.round(m.margins[0], 4)) for m in new.per_mode], "->", new.verdict)
