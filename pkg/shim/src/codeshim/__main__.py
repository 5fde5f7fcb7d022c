"""Protocol entry point: one JSON request line in, one JSON response line out."""

from __future__ import annotations

import argparse
import json
import sys

from codeshim.runner import execute


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="codeshim")
    parser.add_argument(
        "--memory-limit",
        type=int,
        default=None,
        metavar="BYTES",
        help="address-space rlimit applied to the candidate process",
    )
    args = parser.parse_args(argv)

    line = sys.stdin.readline()
    if not line.strip():
        print(json.dumps({"error": "empty request"}), flush=True)
        return 2
    try:
        request = json.loads(line)
        source = request["source"]
        stdin_data = request.get("stdin_data", "")
        wall_clock_limit = float(request["wall_clock_limit"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        print(json.dumps({"error": f"malformed request: {exc}"}), flush=True)
        return 2

    result = execute(
        source,
        stdin_data,
        wall_clock_limit,
        memory_limit=args.memory_limit,
    )
    sys.stdout.write(json.dumps(result.to_record()) + "\n")
    sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
