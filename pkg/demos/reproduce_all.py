"""Regenerate every figure and example into ``out/``.

Run with ``python demos/reproduce_all.py``; pass ``--svg`` for plots
(needs matplotlib).
"""
import json
import sys

from qswitch.harness import CASES, reproduce

svg = "--svg" in sys.argv
for case in CASES:
    report = reproduce(case, "out", svg=svg)
    keys = {k: report[k] for k in ("verdicts", "binary_guarantee") if k in report}
    if "sandwich" in report:
        keys["sandwich"] = report["sandwich"]["verdict"]
        keys["final_norms"] = report["sandwich"]["final_norms"]
    print(case, json.dumps(keys))
