"""Per-task GPU power-cap recommendations from power and task traces."""

__version__ = "0.1.0"
