"""Library-model baselines emitting faultcast-compatible run reports."""

__version__ = "0.1.0"
