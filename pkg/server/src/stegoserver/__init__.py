"""Deterministic model serving for steganographic coding clients."""

from .app import build_app
from .model import Backend, CheckpointBackend, DemoBackend, ServerConfig, load_backend

__version__ = "0.1.0"
