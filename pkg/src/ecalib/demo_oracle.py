"""Reference oracle speaking the line protocol, for tests and smoke runs.

Answers each tested id with a Bernoulli draw around its configured mean
(deterministic in --seed, round, and id) or with the mean itself under
--dist point.  The --misbehave flag makes it violate the protocol on round 2,
which the client tests use to exercise every abort path.

Run as: python -m ecalib.demo_oracle --means 0.1,0.3,0.5
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from .rng import unit_uniform


def _emit(doc: dict) -> None:
    sys.stdout.write(json.dumps(doc) + "\n")
    sys.stdout.flush()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--means", required=True, help="comma-separated means, one per candidate")
    parser.add_argument("--dist", choices=["bernoulli", "point"], default="bernoulli")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--misbehave",
        choices=["none", "short", "range", "silent", "die", "garbage", "wrong_round"],
        default="none",
        help="violate the protocol on round 2",
    )
    args = parser.parse_args(argv)
    means = [float(x) for x in args.means.split(",")]

    hello = sys.stdin.readline()
    if not hello:
        return 1
    try:
        msg = json.loads(hello)
    except json.JSONDecodeError:
        _emit({"type": "error", "message": "hello was not JSON"})
        return 1
    if msg.get("type") != "hello":
        _emit({"type": "error", "message": "expected hello"})
        return 1
    if msg.get("n_candidates") != len(means):
        _emit({"type": "error", "message": "candidate count mismatch"})
        return 1
    _emit({"type": "hello", "stateless": True})

    for line in sys.stdin:
        try:
            msg = json.loads(line)
        except json.JSONDecodeError:
            _emit({"type": "error", "message": f"bad request: {line!r}"})
            return 1
        if msg.get("type") != "test":
            _emit({"type": "error", "message": f"unexpected message type {msg.get('type')!r}"})
            return 1
        t = int(msg["round"])
        ids = list(msg["ids"])
        if args.misbehave != "none" and t == 2:
            if args.misbehave == "short":
                _emit({"type": "risks", "round": t, "values": []})
                continue
            if args.misbehave == "range":
                _emit({"type": "risks", "round": t, "values": [1.2 for _ in ids]})
                continue
            if args.misbehave == "silent":
                time.sleep(3600)
            if args.misbehave == "die":
                return 1
            if args.misbehave == "garbage":
                sys.stdout.write("not json at all\n")
                sys.stdout.flush()
                continue
            if args.misbehave == "wrong_round":
                _emit({"type": "risks", "round": t + 7, "values": [0.5 for _ in ids]})
                continue
        values = []
        for i in ids:
            m = means[i]
            if args.dist == "point":
                values.append(m)
            else:
                u = unit_uniform(args.seed, t, i)
                values.append(1.0 if u >= 1.0 - m else 0.0)
        _emit({"type": "risks", "round": t, "values": values})
    return 0


if __name__ == "__main__":
    sys.exit(main())
