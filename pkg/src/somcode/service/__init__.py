"""HTTP service layer: FastAPI app plus pydantic schemas."""

from .app import app

__all__ = ["app"]
