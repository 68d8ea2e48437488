"""Monitoring of garbage vulnerable points (GVPs) from fixed street cameras.

Detections from any object detector are turned into ROI coverage series,
temporal profiles and dump/pile/clear events, and scored against YOLO-format
ground truth. A seeded simulator produces synthetic campaigns for testing.
"""

__version__ = "0.1.0"
