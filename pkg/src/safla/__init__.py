"""Bottom-up intent extraction, consistency checking and self-healing for SDN flow tables."""

__version__ = "0.1.0"
