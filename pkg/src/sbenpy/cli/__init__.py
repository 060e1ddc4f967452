"""Batch front-end: JSON run configs, solver runs and result export."""

from sbenpy.cli.config import RunConfig, load_config, parse_config, serialize_config
from sbenpy.cli.main import main

__all__ = ["RunConfig", "load_config", "parse_config", "serialize_config", "main"]
