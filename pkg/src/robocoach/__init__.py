"""robocoach: a fully simulated robot coach for configured rehab sessions."""

__version__ = "0.1.0"
