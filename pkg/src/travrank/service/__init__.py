"""HTTP annotation service: dispenses pair tasks, records ordinal judgments."""

from .app import create_app
from .state import TaskPool

__all__ = ["create_app", "TaskPool"]
