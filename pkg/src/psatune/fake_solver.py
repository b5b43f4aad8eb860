"""A tiny anytime "solver" for exercising the command-line adapter.

Usage: python -m psatune.fake_solver INSTANCE -t=SECONDS [-name=value ...] [-ub=BOUND]

The instance is JSON::

    {"incumbents": [100, 64, 42],   # printed in order as "o <value>"
     "delay": 0.05,                 # seconds between incumbents
     "offsets": {"heur=b": -5},     # added to every incumbent when flag -heur=b is given
     "hang": false}                 # ignore the time limit and never exit

Incumbents not strictly below ``-ub`` are suppressed.
"""

from __future__ import annotations

import json
import sys
import time


def main(argv: list[str] | None = None) -> int:
    args = list(sys.argv[1:] if argv is None else argv)
    if not args:
        print("usage: fake_solver INSTANCE -t=SECONDS [flags]", file=sys.stderr)
        return 2
    doc = json.loads(open(args[0]).read())
    limit = float("inf")
    bound = None
    flags = []
    for a in args[1:]:
        if a.startswith("-t="):
            limit = float(a[3:].rstrip("s"))
        elif a.startswith("-ub="):
            bound = float(a[4:])
        else:
            flags.append(a.lstrip("-"))
    shift = sum(doc.get("offsets", {}).get(f, 0) for f in flags)
    delay = float(doc.get("delay", 0.0))
    start = time.monotonic()
    printed = 0
    truncated = False
    print(f"c fake solver flags={' '.join(flags)}", flush=True)
    for value in doc.get("incumbents", []):
        if time.monotonic() - start + delay > limit and not doc.get("hang"):
            truncated = True
            break
        time.sleep(delay)
        value = value + shift
        if bound is not None and value >= bound:
            continue
        print(f"o {value}", flush=True)
        printed += 1
    if doc.get("hang"):
        while True:
            time.sleep(1.0)
    if truncated:
        print("s SATISFIABLE" if printed else "s UNKNOWN", flush=True)
    elif printed:
        print("s OPTIMUM FOUND", flush=True)
    else:
        print("s UNSATISFIABLE", flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
