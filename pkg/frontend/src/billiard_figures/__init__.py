"""Figure rendering for drivenbilliard CSV artifacts."""

__version__ = "0.1.0"
