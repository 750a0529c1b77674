"""
Write the reference verify reports to reports/.

One JSON + CSV pair per reference extension, the same runs the critical
acceptance tests make. Exits 1 if any report carries a FAIL.
"""
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.commands.documents import RunConfig
from app.commands.runners import run
from app.config import get_settings
from app.services.report import emit_report

REFERENCE_RUNS = [
    (3, "sqrt-pi", 6),
    (3, "sqrt-u-pi", 6),
    (2, "sqrt(-1)", 6),
    (2, "sqrt(2)", 6),
    (3, "unramified", 3),
    (2, "unramified", 4),
    (5, "unramified", 2),
]


def main():
    settings = get_settings()
    out_dir = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "reports")
    failed = []

    for p, tag, n_max in REFERENCE_RUNS:
        config = RunConfig(command="verify", p=p, extensions=[tag], n_max=n_max,
                           cache_dir=settings.cache_dir, workers=settings.workers)
        doc, stats = run(config)
        name = f"verify-p{p}-{tag.replace('(', '').replace(')', '')}"
        emit_report(doc, os.path.join(out_dir, name), ["json", "csv"], stats)
        print(f"  {name:32} {doc.verdict}  ({stats['elapsed']}s)")
        if doc.verdict == "FAIL":
            failed.append(name)

    if failed:
        print(f"\nFAIL: {', '.join(failed)}")
        sys.exit(1)
    print("\nAll reference reports PASS")


if __name__ == "__main__":
    main()
