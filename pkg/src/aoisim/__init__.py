"""Two-tier aerial computing simulator with AoI-aware multi-agent RL."""

from .config import ScenarioConfig, load_config, make_config

__all__ = ["ScenarioConfig", "load_config", "make_config"]
__version__ = "0.1.0"
