"""Serve a toy predictor over the stdio protocol.

    python -m saibench.harness.toy_server knn_forces
"""

from __future__ import annotations

import argparse
import json
import sys

from ..core import SCHEMA_VERSION, canonical_json, prediction_to_wire
from ..synth import TOY_KINDS, make_toy_model
from .protocol import input_to_sample, train_record_to_sample


def serve(kind: str, stdin=sys.stdin, stdout=sys.stdout) -> int:
    hello = json.loads(stdin.readline())
    if hello.get("type") != "hello" or hello.get("schema_version") != SCHEMA_VERSION:
        print(f"bad handshake: {hello!r}", file=sys.stderr)
        return 1
    workload = hello["workload"]
    seed = hello.get("seed")
    train = [train_record_to_sample(workload, r) for r in hello.get("train", [])]
    model = make_toy_model(kind, train, **(hello.get("config") or {}))
    stdout.write(canonical_json({"type": "ack", "schema_version": SCHEMA_VERSION}) + "\n")
    stdout.flush()
    for line in stdin:
        msg = json.loads(line)
        if msg.get("type") == "shutdown":
            return 0
        sample = input_to_sample(workload, msg["input"])
        out = model.predict(sample, seed)
        stdout.write(canonical_json({"type": "result", "id": msg["id"], "output": prediction_to_wire(workload, out)}) + "\n")
        stdout.flush()
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    parser.add_argument("kind", choices=TOY_KINDS)
    args = parser.parse_args(argv)
    return serve(args.kind)


if __name__ == "__main__":
    sys.exit(main())
