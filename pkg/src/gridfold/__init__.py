"""Geographic network reduction and two-step capacity expansion planning."""

__version__ = "0.1.0"
