"""Adapter that replays boxes from a detections JSONL file.

Usage: python -m gvpmon.adapters.replay DETECTIONS.jsonl
Frames missing from the file get an empty box list.
"""

import json
import sys

from ._proto import serve


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1:
        sys.stderr.write("usage: python -m gvpmon.adapters.replay DETECTIONS.jsonl\n")
        return 2
    boxes = {}
    with open(argv[0], encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                boxes[obj["frame_id"]] = obj.get("boxes", [])
    serve(lambda frame_id: boxes.get(frame_id, []))
    return 0


if __name__ == "__main__":
    sys.exit(main())
