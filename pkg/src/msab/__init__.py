"""Multi-sensor measurement-adaptive birth for labeled random finite set trackers."""

__version__ = "0.1.0"
