"""Reference adapters speaking the detector line protocol.

``empty``  answers every frame with zero boxes.
``replay`` answers from a detections file keyed by frame id.

Both are useful as templates for wrapping a real inference backend.
"""
