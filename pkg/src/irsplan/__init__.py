"""Planning with interpretable decisions about when to use auxiliary objects."""

from __future__ import annotations

__version__ = "0.1.0"
