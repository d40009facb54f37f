"""Run the acceptance criteria and print one PASS/FAIL line each.

    python3 scripts/run_acceptance.py            # all twelve
    python3 scripts/run_acceptance.py 3 4 5      # a subset
"""
import argparse
import json
import sys
import time

from blinstab import acceptance
from blinstab.config import RunConfig


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("criteria", nargs="*", type=int, help="criterion numbers (default: all)")
    ap.add_argument("--workers", type=int, default=4)
    ap.add_argument("--json", help="also write the results to this file")
    args = ap.parse_args()
    which = args.criteria or sorted(acceptance.CRITERIA)
    cfg = RunConfig(workers=args.workers)
    results = []
    for k in which:
        t0 = time.time()
        res = acceptance.CRITERIA[k](cfg)
        print(f"{res.line()} ({time.time() - t0:.1f}s)", flush=True)
        results.append(res)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump([acceptance._jsonable(r.as_dict()) for r in results], fh, indent=2)
    print(f"{sum(r.passed for r in results)}/{len(results)} criteria passed")
    return 0 if all(r.passed for r in results) else 1


if __name__ == "__main__":
    sys.exit(main())
