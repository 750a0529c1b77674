"""
Application services module.
"""

from app.services.cache import TableCache
from app.services.report import ReportWriter, emit_report

__all__ = ["TableCache", "ReportWriter", "emit_report"]
