"""Traffic emergency planning: closures, rerouting activation and evacuation."""

__version__ = "0.1.0"
