"""
Command layer: request/report documents and the runners behind the CLI.
"""

from app.commands.documents import ConfigEcho, ReportDocument, RunConfig
from app.commands.runners import RUNNERS, run

__all__ = ["ConfigEcho", "ReportDocument", "RunConfig", "RUNNERS", "run"]
