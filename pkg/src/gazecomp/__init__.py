"""Gaze-completion mistake detection on egocentric sessions."""

__version__ = "0.1.0"
