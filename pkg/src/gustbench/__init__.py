"""Quadrotor gate-traversal flight simulator and environment service."""

__version__ = "0.1.0"

PROTOCOL_VERSION = 1

from .env import ACT_DIM, OBS_DIM, Environment  # noqa: F401,E402
from .config import ScenarioConfig, load_scenario  # noqa: F401,E402
