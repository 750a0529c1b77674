"""
Database connection and session management for the table cache.
"""

import os
from contextlib import contextmanager
from functools import lru_cache
from typing import Generator, Optional

from sqlalchemy import create_engine
from sqlalchemy.engine import Engine
from sqlalchemy.orm import sessionmaker, Session

from app.config import get_settings
from app.db.models import Base


def cache_url(cache_dir: str) -> str:
    return f"sqlite:///{os.path.join(cache_dir, 'tables.sqlite')}"


@lru_cache(maxsize=16)
def get_engine(url: str) -> Engine:
    """One engine per database URL, tables created on first use."""
    engine = create_engine(
        url,
        connect_args={"check_same_thread": False},  # Needed for SQLite
    )
    Base.metadata.create_all(bind=engine)
    return engine


def get_session_factory(cache_dir: Optional[str] = None) -> sessionmaker:
    cache_dir = cache_dir or get_settings().cache_dir
    os.makedirs(cache_dir, exist_ok=True)
    return sessionmaker(autocommit=False, autoflush=False, bind=get_engine(cache_url(cache_dir)))


@contextmanager
def get_db_context(cache_dir: Optional[str] = None) -> Generator[Session, None, None]:
    """Context manager for cache sessions."""
    db = get_session_factory(cache_dir)()
    try:
        yield db
        db.commit()
    except Exception:
        db.rollback()
        raise
    finally:
        db.close()
