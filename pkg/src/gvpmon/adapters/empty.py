"""Adapter that reports no detections for any frame."""

from ._proto import serve


def main():
    serve(lambda frame_id: [])


if __name__ == "__main__":
    main()
