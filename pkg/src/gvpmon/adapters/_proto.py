import json
import sys
from pathlib import Path

from ..dataset import parse_frame_id


def serve(lookup):
    """Answer one record per stdin line; ``lookup(frame_id)`` gives the boxes."""
    for line in sys.stdin:
        path = line.strip()
        if not path:
            continue
        frame_id = Path(path).stem
        rec = {"frame_id": frame_id, "ts": parse_frame_id(frame_id), "boxes": lookup(frame_id)}
        sys.stdout.write(json.dumps(rec) + "\n")
        sys.stdout.flush()
