"""Screen-then-hire pipeline: closed-form diversity/quality analysis, estimation, simulation."""

__version__ = "0.1.0"
