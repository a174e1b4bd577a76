"""qagserver: wire-protocol model server and fine-tuning for the qag pipeline."""

__version__ = "0.1.0"

from .app import create_app
from .config import DecodeDefaults, ServerConfig
from .modelpool import ModelPool

__all__ = ["DecodeDefaults", "ModelPool", "ServerConfig", "create_app"]
