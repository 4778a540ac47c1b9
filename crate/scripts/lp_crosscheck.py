#!/usr/bin/env python3
"""Solve an exported LP file with HiGHS and print the outcome as JSON.

Output: {"status": "optimal"|"infeasible"|<other>, "objective": float|null,
"ones": [names of binaries at 1]}. Exit code 3 when highspy is missing.
"""
import json
import sys

try:
    import highspy
except ImportError:
    print(json.dumps({"status": "unavailable"}))
    sys.exit(3)


def main(path):
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", 0.0)
    h.setOptionValue("mip_abs_gap", 0.0)
    h.readModel(path)
    h.run()
    status = h.getModelStatus()
    out = {"status": h.modelStatusToString(status).lower(), "objective": None, "ones": []}
    if status == highspy.HighsModelStatus.kOptimal:
        out["status"] = "optimal"
        out["objective"] = h.getInfo().objective_function_value
        values = h.getSolution().col_value
        lp = h.getLp()
        out["ones"] = [lp.col_names_[i] for i, v in enumerate(values) if v > 0.5]
    elif status == highspy.HighsModelStatus.kInfeasible:
        out["status"] = "infeasible"
    print(json.dumps(out))


if __name__ == "__main__":
    main(sys.argv[1])
