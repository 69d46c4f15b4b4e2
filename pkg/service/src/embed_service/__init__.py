"""Sidecar HTTP service hosting transformer encoders and summarizers."""

from .app import create_app, create_app_from_manifest
from .manifest import ModelSpec, load_manifest

__version__ = "0.1.0"
