"""Cross-layer network coding delivery and learned caching for fog radio access networks."""

from .config import ConfigError, ScenarioConfig, load_config, parse_config

__all__ = ["ConfigError", "ScenarioConfig", "load_config", "parse_config"]
__version__ = "0.1.0"
