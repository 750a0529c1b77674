"""
SQLAlchemy ORM models for the table cache.
"""

from datetime import datetime

from sqlalchemy import (
    Column,
    DateTime,
    Integer,
    JSON,
    String,
    UniqueConstraint,
)
from sqlalchemy.orm import declarative_base

Base = declarative_base()


class CacheKind:
    """Kinds of stored tables."""
    BASIS = "basis"
    CHARS = "chars"
    SIGNS = "signs"


class CacheEntry(Base):
    """
    One stored table, addressed by the sha256 of its canonical key.

    The payload is trusted only after the loader has re-checked it
    against the structural invariants of its kind.
    """

    __tablename__ = "cache_entries"
    __table_args__ = (UniqueConstraint("cache_key", name="uq_cache_key"),)

    id = Column(Integer, primary_key=True, autoincrement=True)
    cache_key = Column(String(64), nullable=False, index=True)

    p = Column(Integer, nullable=False)
    tag = Column(String(32), nullable=False)
    level = Column(Integer, nullable=False)
    kind = Column(String(16), nullable=False)
    format_version = Column(Integer, nullable=False)

    payload = Column(JSON, nullable=False)
    created_at = Column(DateTime, default=datetime.utcnow, nullable=False)

    def __repr__(self) -> str:
        return f"<CacheEntry {self.kind} p={self.p} {self.tag} n={self.level} v{self.format_version}>"
