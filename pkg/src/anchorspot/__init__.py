"""Single-shot scene text spotter: parallel detection and recognition
bridged by shared positive anchor points."""

__version__ = "0.1.0"
