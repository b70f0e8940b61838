"""Cluster-scheduling simulator with tunable scoring weights."""

__version__ = "0.1.0"
