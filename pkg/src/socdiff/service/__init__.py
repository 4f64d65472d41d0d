"""HTTP service exposing datasets, diffusion evaluation, and self-checks."""

from .app import create_app

__all__ = ["create_app"]
