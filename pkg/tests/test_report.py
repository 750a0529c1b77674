"""
Tests for the command runners and report emission.
"""

import json
import os

import pandas as pd
import pytest
from pydantic import ValidationError

from app.calculations.characters import format_char
from app.calculations.errors import InvariantError
from app.commands.documents import ReportDocument, RunConfig
from app.commands.runners import run, sample_points
from app.db.database import get_db_context
from app.db.models import CacheEntry, CacheKind
from app.services.cache import TableCache
from app.services.report import CSV_COLUMNS, census_frame, emit_report, load_report


def make_config(cache_dir, **overrides):
    fields = {
        "command": "census",
        "p": 3,
        "extensions": ["sqrt-pi"],
        "n_max": 4,
        "ratio_conductors": [2],
        "theta_count": 2,
        "cache_dir": cache_dir,
    }
    fields.update(overrides)
    return RunConfig(**fields)


# ============================================================================
# CONFIG
# ============================================================================

class TestRunConfig:
    """Validation before any table is built."""

    def test_working_level(self, cache_dir):
        config = make_config(cache_dir, n_max=2, ratio_conductors=[4])
        assert config.working_level == 4

    def test_echo_drops_operational_fields(self, cache_dir):
        echo = make_config(cache_dir, workers=3).echo().model_dump()
        assert "cache_dir" not in echo
        assert "workers" not in echo
        assert echo["ratio_conductors"] == [2]

    @pytest.mark.parametrize("overrides", [
        {"p": 4},
        {"extensions": ["sqrt(-1)"]},
        {"extensions": []},
        {"n_max": 0},
        {"n_max": 9},
        {"command": "plot"},
        {"suites": ["everything"]},
        {"formats": ["xlsx"]},
        {"theta_count": 0},
        {"dps": 50, "max_dps": 40},
    ])
    def test_rejected(self, cache_dir, overrides):
        with pytest.raises(ValidationError):
            make_config(cache_dir, **overrides)


# ============================================================================
# RUNNERS
# ============================================================================

class TestRunners:

    def test_census_document(self, cache_dir):
        doc, stats = run(make_config(cache_dir))
        assert doc.verdict == "PASS"
        assert doc.command == "census"
        report = doc.extensions[0]
        assert report.conventions.tag == "sqrt-pi"
        assert report.conventions.omega_minus_one == -1
        assert report.conventions.epsilon_omega is not None
        assert len(report.censuses) == 2
        assert all(cen.ratio_conductor == 2 for cen in report.censuses)
        assert stats["cache"]["stored"] >= 2

    def test_enumerate_document(self, cache_dir):
        doc, _ = run(make_config(cache_dir, command="enumerate", ratio_conductors=[]))
        report = doc.extensions[0]
        assert len(report.characters) == 18
        assert {c.member_of for c in report.characters} == {"S", "S'"}
        assert [(r.conductor, r.S_plus, r.S_minus) for r in report.strata] == [(1, 1, 1), (2, 2, 2), (4, 6, 6)]
        assert all(check.verdict == "PASS" for check in report.checks)

    def test_epsilon_document(self, cache_dir):
        doc, _ = run(make_config(cache_dir, command="enumerate", n_max=2, ratio_conductors=[]))
        encoding = doc.extensions[0].characters[0].encoding
        query_doc, _ = run(make_config(cache_dir, command="epsilon", n_max=2,
                                       ratio_conductors=[], character=encoding))
        query = query_doc.extensions[0].epsilon
        assert query.encoding == encoding
        assert query.eps.sign in (1, -1)
        assert query.sign_inverse == doc.extensions[0].characters[0].eps_inverse

    def test_epsilon_needs_one_extension(self, cache_dir):
        config = make_config(cache_dir, command="epsilon", n_max=2, ratio_conductors=[],
                             extensions=["sqrt-pi", "sqrt-u-pi"], character="N2/M12:0|0")
        with pytest.raises(ValueError):
            run(config)

    def test_identities_reject_unramified(self, cache_dir):
        config = make_config(cache_dir, command="identities", extensions=["unramified"],
                             n_max=2, ratio_conductors=[])
        with pytest.raises(ValueError):
            run(config)

    def test_verify_unramified(self, cache_dir):
        config = make_config(cache_dir, command="verify", extensions=["unramified"],
                             n_max=2, ratio_conductors=[])
        doc, _ = run(config)
        names = {check.name for check in doc.extensions[0].checks}
        assert "unramified_closed_form" in names
        assert doc.verdict == "PASS"

    def test_flipped_sign_is_caught(self, cache_dir):
        listing, _ = run(make_config(cache_dir, command="enumerate", ratio_conductors=[]))
        victim = next(c.encoding for c in listing.extensions[0].characters if c.conductor == 4)

        def flip_one(chi):
            return format_char(chi) == victim

        with pytest.raises(InvariantError):
            run(make_config(cache_dir), TableCache(cache_dir, enabled=False), flip_one)

    def test_census_stops_at_first_fail(self, cache_dir, flip_after):
        listing, _ = run(make_config(cache_dir, command="enumerate", ratio_conductors=[]))
        flip = flip_after(len(listing.extensions[0].characters))
        config = make_config(cache_dir, ratio_conductors=[2, 4], workers=1)
        doc, _ = run(config, TableCache(cache_dir, enabled=False), flip)

        assert doc.verdict == "FAIL"
        censuses = doc.extensions[0].censuses
        # first theta of the first target fails; nothing after it is run
        assert len(censuses) == 1
        rows = censuses[0].rows
        assert rows[-1].verdict == "FAIL"
        assert rows[-1].counterexample is not None
        assert all(row.verdict != "FAIL" for row in rows[:-1])

    def test_sample_points_lie_outside_F(self, R3):
        for x in sample_points(R3, 5, seed=3):
            assert not (x - x.conj()).is_zero()


# ============================================================================
# EMISSION
# ============================================================================

class TestReportFiles:

    def test_json_round_trip(self, cache_dir, tmp_path):
        doc, stats = run(make_config(cache_dir))
        written = emit_report(doc, str(tmp_path / "out" / "census"), ["json"], stats)
        assert written[0].endswith("census.json")
        assert load_report(written[0]) == doc
        with open(str(tmp_path / "out" / "census.stats.json")) as fh:
            assert "elapsed" in json.load(fh)

    def test_csv_columns_and_partition(self, cache_dir, tmp_path):
        doc, _ = run(make_config(cache_dir))
        emit_report(doc, str(tmp_path / "census.csv"), ["csv"])
        frame = pd.read_csv(tmp_path / "census.csv")
        assert list(frame.columns) == CSV_COLUMNS
        assert (frame["Rplus"] + frame["RDplus"] == frame["S_plus"]).all()
        assert (frame["Rminus"] + frame["RDminus"] == frame["S_minus"]).all()

    def test_empty_document(self, tmp_path):
        doc = ReportDocument.model_validate({
            "format_version": 1, "command": "census",
            "config": {"command": "census", "p": 3, "extensions": ["sqrt-pi"], "n_max": 1},
            "extensions": [],
        })
        assert census_frame(doc).empty
        emit_report(doc, str(tmp_path / "empty"), ["json", "csv"])
        with open(tmp_path / "empty.csv") as fh:
            assert fh.read().strip() == ",".join(CSV_COLUMNS)

    def test_unknown_format(self, cache_dir, tmp_path):
        doc, _ = run(make_config(cache_dir))
        with pytest.raises(ValueError):
            emit_report(doc, str(tmp_path / "x"), ["xml"])


class TestDeterminism:
    """Reports do not depend on the cache or on worker count."""

    def _bytes(self, doc, path):
        emit_report(doc, path, ["json", "csv"])
        with open(path + ".json", "rb") as a, open(path + ".csv", "rb") as b:
            return a.read(), b.read()

    def test_cold_warm_and_uncached(self, cache_dir, tmp_path):
        cold, _ = run(make_config(cache_dir))
        warm, warm_stats = run(make_config(cache_dir))
        bare, _ = run(make_config(cache_dir, cache_enabled=False, workers=2))
        assert warm_stats["cache"]["hits"] >= 3
        first = self._bytes(cold, str(tmp_path / "cold"))
        assert self._bytes(warm, str(tmp_path / "warm")) == first
        assert self._bytes(bare, str(tmp_path / "bare")) == first

    def test_tampered_cache_same_report(self, cache_dir, tmp_path):
        clean, _ = run(make_config(cache_dir))
        with get_db_context(cache_dir) as db:
            entry = db.query(CacheEntry).filter(CacheEntry.kind == CacheKind.SIGNS).first()
            signs = dict(entry.payload["signs"])
            key = sorted(signs)[0]
            signs[key] = [-signs[key][0], -signs[key][1]]
            entry.payload = {"signs": signs}
        again, stats = run(make_config(cache_dir))
        assert stats["cache"]["rejected"] == 1
        assert again.model_dump_json() == clean.model_dump_json()
        assert os.path.exists(os.path.join(cache_dir, "tables.sqlite"))
