"""HTTP service exposing the factorization library."""

from .app import app, create_app

__all__ = ["app", "create_app"]
