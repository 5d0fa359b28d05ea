"""Randomized checks of the certificates and of the Melo implication.

Run with ``python demos/fuzzing.py``.  The binary-feature case never produces
a counterexample; relaxing to weighted (non-binary) partition features does.
"""
from qswitch.harness import fuzz

for kind in ("tabular", "averaging"):
    s = fuzz(kind, 50, seed=0, sandwich=False)
    print(f"{kind:10s} margin-formula violations: {len(s.violations)}/50")

s = fuzz("lfa_binary", 10, seed=0, t_final=30.0)
print(f"lfa_binary  violations: {len(s.violations)}/10, skipped (no fixed point): {len(s.skipped)}")

for features in ("binary", "weighted"):
    s = fuzz("melo_implies_new", 200, seed=0, features=features)
    print(f"melo => new with {features:8s} features: {len(s.violations)} counterexamples, Melo held in {s.stats['melo_holds']} of 200")
