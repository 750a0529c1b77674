"""
Table cache storage.
"""

from app.db.database import get_db_context, get_engine
from app.db.models import Base, CacheEntry, CacheKind

__all__ = ["get_db_context", "get_engine", "Base", "CacheEntry", "CacheKind"]
