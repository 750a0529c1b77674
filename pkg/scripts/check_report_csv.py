"""
Re-judge the census cells of a CSV report without the engine.

Reads only the CSV: the partition identity, the S / S' pairing on
ramified rows and every prediction that is a function of the counts.
Parity-rule rows need the characters themselves and are only counted.

Usage:
    python scripts/check_report_csv.py reports/census.csv
"""
import re
import sys

import pandas as pd
import typer

# Tags of unramified extensions; S and S' need not pair there
UNRAMIFIED_TAGS = {"unramified", "sqrt(5)"}
BOUNDED = re.compile(r"^(exact|lower-bound)\((=|>=)(\d+)\)$")


def judge(row: pd.Series) -> bool:
    rp, rm = row["Rplus"], row["Rminus"]
    sp, sm = row["S_plus"], row["S_minus"]
    kind = row["predicted"]
    if kind == "none":
        return rp + rm == 0
    if kind == "all":
        return rp + rm == sp + sm
    if kind == "half":
        return 2 * rp == sp and 2 * rm == sm
    if kind == "total-half":
        return 2 * (rp + rm) == sp + sm
    if kind == "all-or-nothing":
        return (rp == sp and rm == 0) or (rp == 0 and rm == sm)
    bounded = BOUNDED.match(kind)
    if bounded:
        name, op, value = bounded.group(1), bounded.group(2), int(bounded.group(3))
        if name == "exact":
            return rp == value and rm == value
        return rp + rm == value if op == "=" else rp + rm >= value
    return True


def main(path: str):
    frame = pd.read_csv(path)
    if frame.empty:
        print(f"{path}: no census cells")
        return

    partition = (frame["Rplus"] + frame["RDplus"] == frame["S_plus"]) & \
                (frame["Rminus"] + frame["RDminus"] == frame["S_minus"])
    ramified = ~frame["ext"].isin(UNRAMIFIED_TAGS)
    paired = ~ramified | (frame["S_plus"] == frame["S_minus"])
    judged = frame.apply(judge, axis=1)
    agrees = judged == (frame["verdict"] != "FAIL")

    problems = frame[~(partition & paired & agrees)]
    parity_rows = int((frame["predicted"] == "parity-rule").sum())

    print(f"{path}: {len(frame)} cells, {parity_rows} parity-rule cells not re-judged")
    if problems.empty:
        print("All cells consistent")
        return
    print(f"{len(problems)} inconsistent cells:")
    print(problems.to_string(index=False))
    sys.exit(1)


if __name__ == "__main__":
    typer.run(main)
