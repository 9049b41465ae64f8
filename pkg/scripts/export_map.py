"""Dump the fixed map layout (rectangles + walking graph) as JSON for
debugging or plotting.

Usage: python scripts/export_map.py [out.json]
"""
import sys
from pathlib import Path

from jaysim.city_map import map_to_json


def main() -> int:
    payload = map_to_json()
    if len(sys.argv) > 1:
        Path(sys.argv[1]).write_text(payload + "\n")
        print(f"wrote {sys.argv[1]}")
    else:
        print(payload)
    return 0


if __name__ == "__main__":
    sys.exit(main())
