#!/usr/bin/env python3
"""Solve an LP file with HiGHS and write a `name value` solution file.

Usage: highs_solve.py MODEL.lp SOLUTION.sol
"""
import sys

import highspy


def main() -> int:
    if len(sys.argv) != 3:
        print(__doc__, file=sys.stderr)
        return 2
    model, out = sys.argv[1], sys.argv[2]
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("primal_feasibility_tolerance", 1e-9)
    h.setOptionValue("dual_feasibility_tolerance", 1e-9)
    h.setOptionValue("mip_rel_gap", 1e-9)
    if h.readModel(model) != highspy.HighsStatus.kOk:
        print(f"cannot read {model}", file=sys.stderr)
        return 1
    h.run()
    status = h.getModelStatus()
    names = {
        highspy.HighsModelStatus.kOptimal: "optimal",
        highspy.HighsModelStatus.kInfeasible: "infeasible",
        highspy.HighsModelStatus.kUnbounded: "unbounded",
    }
    label = names.get(status, "unknown")
    lp = h.getLp()
    with open(out, "w") as f:
        f.write(f"# status {label}\n")
        if label == "optimal":
            f.write(f"# objective {h.getInfo().objective_function_value!r}\n")
            values = h.getSolution().col_value
            for j in range(lp.num_col_):
                f.write(f"{lp.col_names_[j]} {values[j]!r}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
