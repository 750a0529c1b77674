"""
Report emission.

JSON is the pydantic dump of the ReportDocument (field order is the
model's declaration order). CSV has one row per (extension, theta,
conductor) census cell with a fixed column contract. Timings and cache
counters go to a separate <report>.stats.json sidecar so that the
report itself is deterministic.
"""

import json
import logging
import os
from typing import Dict, List, Optional, Sequence

import pandas as pd

from app.commands.documents import ReportDocument

logger = logging.getLogger(__name__)

CSV_COLUMNS = [
    "ext",
    "theta",
    "ratio_conductor",
    "conductor",
    "S_plus",
    "S_minus",
    "Rplus",
    "Rminus",
    "RDplus",
    "RDminus",
    "predicted",
    "verdict",
]


def census_frame(doc: ReportDocument) -> pd.DataFrame:
    """Census cells of the document as a DataFrame in CSV column order."""
    records: List[Dict[str, object]] = []
    for report in doc.extensions:
        for cen in report.censuses:
            for row in cen.rows:
                records.append({
                    "ext": report.conventions.tag,
                    "theta": cen.theta,
                    "ratio_conductor": cen.ratio_conductor,
                    "conductor": row.conductor,
                    "S_plus": row.S_plus,
                    "S_minus": row.S_minus,
                    "Rplus": row.Rplus,
                    "Rminus": row.Rminus,
                    "RDplus": row.RDplus,
                    "RDminus": row.RDminus,
                    "predicted": row.predicted,
                    "verdict": row.verdict,
                })
    return pd.DataFrame.from_records(records, columns=CSV_COLUMNS)


class ReportWriter:
    """Writes a document to <base>.json and/or <base>.csv plus the stats sidecar."""

    def __init__(self, base_path: str):
        root, ext = os.path.splitext(base_path)
        self.base = root if ext in (".json", ".csv") else base_path

    def path(self, suffix: str) -> str:
        return f"{self.base}{suffix}"

    def write_json(self, doc: ReportDocument) -> str:
        path = self.path(".json")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(doc.model_dump_json(indent=2))
            fh.write("\n")
        return path

    def write_csv(self, doc: ReportDocument) -> str:
        path = self.path(".csv")
        census_frame(doc).to_csv(path, index=False, lineterminator="\n")
        return path

    def write_stats(self, stats: Dict[str, object]) -> str:
        path = self.path(".stats.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(stats, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path

    def emit(self, doc: ReportDocument, formats: Sequence[str] = ("json",),
             stats: Optional[Dict[str, object]] = None) -> List[str]:
        """
        Write every requested format.

        Raises:
            ValueError: On an unknown format
            OSError: If the target directory is not writable
        """
        directory = os.path.dirname(self.base)
        if directory:
            os.makedirs(directory, exist_ok=True)
        written = []
        for fmt in formats:
            if fmt == "json":
                written.append(self.write_json(doc))
            elif fmt == "csv":
                written.append(self.write_csv(doc))
            else:
                raise ValueError(f"unknown report format {fmt!r}")
        if stats is not None:
            written.append(self.write_stats(stats))
        logger.info(f"Report written: {', '.join(written)}")
        return written


def emit_report(doc: ReportDocument, base_path: str, formats: Sequence[str] = ("json",),
                stats: Optional[Dict[str, object]] = None) -> List[str]:
    return ReportWriter(base_path).emit(doc, formats, stats)


def load_report(path: str) -> ReportDocument:
    with open(path, encoding="utf-8") as fh:
        return ReportDocument.model_validate_json(fh.read())
