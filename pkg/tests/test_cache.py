"""
Tests for the SQLite table cache.

Every stored table is re-checked on load; a bad entry is dropped with a
warning and recomputed, and results never depend on the cache state.
"""

import os

import numpy as np

from app.calculations.epsilon import EpsilonEngine
from app.db.database import get_db_context
from app.db.models import CacheEntry, CacheKind
from app.services.cache import TableCache, deterministic_cache_key


def _tamper(cache_dir, kind, mutate):
    with get_db_context(cache_dir) as db:
        entry = db.query(CacheEntry).filter(CacheEntry.kind == kind).first()
        payload = dict(entry.payload)
        mutate(payload)
        entry.payload = payload


class TestCacheKey:

    def test_key_is_stable(self):
        key = deterministic_cache_key({"p": 3, "tag": "sqrt-pi"}, 1)
        assert key == deterministic_cache_key({"tag": "sqrt-pi", "p": 3}, 1)
        assert len(key) == 64

    def test_version_changes_key(self, R3, cache_dir):
        assert TableCache(cache_dir, 1).key(R3, 4, CacheKind.BASIS) != \
            TableCache(cache_dir, 2).key(R3, 4, CacheKind.BASIS)


class TestCharacterSpace:
    """Basis tables."""

    def test_cold_then_warm(self, R3, cache_dir):
        cold = TableCache(cache_dir)
        first = cold.character_space(R3, 4)
        assert cold.stats.misses == 1 and cold.stats.stored == 1

        warm = TableCache(cache_dir)
        second = warm.character_space(R3, 4)
        assert warm.stats.hits == 1
        assert second.group.generators == first.group.generators
        assert np.array_equal(second.group.dlog_table, first.group.dlog_table)

    def test_tampered_basis_is_recomputed(self, R3, cache_dir):
        fresh = TableCache(cache_dir).character_space(R3, 4)

        def double_first_order(payload):
            payload["orders"] = [payload["orders"][0] * 2] + payload["orders"][1:]
        _tamper(cache_dir, CacheKind.BASIS, double_first_order)

        cache = TableCache(cache_dir)
        space = cache.character_space(R3, 4)
        assert cache.stats.rejected == 1
        assert space.group.generators == fresh.group.generators

    def test_malformed_basis_is_recomputed(self, U3, cache_dir):
        TableCache(cache_dir).character_space(U3, 2)
        _tamper(cache_dir, CacheKind.BASIS, lambda payload: payload.pop("generators"))
        cache = TableCache(cache_dir)
        assert cache.character_space(U3, 2).group.order == 72
        assert cache.stats.rejected == 1

    def test_format_version_mismatch(self, R3, cache_dir):
        TableCache(cache_dir).character_space(R3, 2)
        with get_db_context(cache_dir) as db:
            db.query(CacheEntry).first().format_version = 99
        cache = TableCache(cache_dir)
        cache.character_space(R3, 2)
        assert cache.stats.rejected == 1
        assert cache.stats.stored == 1

    def test_disabled_cache_writes_nothing(self, R3, tmp_path):
        target = str(tmp_path / "never")
        cache = TableCache(target, enabled=False)
        cache.character_space(R3, 2)
        assert not os.path.exists(os.path.join(target, "tables.sqlite"))
        assert cache.stats.as_dict() == {"hits": 0, "misses": 0, "rejected": 0, "stored": 0}


class TestCharacters:
    """Character rows."""

    def test_round_trip(self, G2, cache_dir):
        cache = TableCache(cache_dir)
        space = cache.character_space(G2, 4)
        chars = cache.characters(space, 4)

        warm = TableCache(cache_dir)
        again = warm.characters(warm.character_space(G2, 4), 4)
        assert warm.stats.hits == 2
        assert [str(c) for c in again.chars] == [str(c) for c in chars.chars]

    def test_wrong_n_max_is_recomputed(self, G2, cache_dir):
        cache = TableCache(cache_dir)
        space = cache.character_space(G2, 4)
        cache.characters(space, 4)
        chars = TableCache(cache_dir).characters(space, 3)
        assert chars.counts() == {3: 4}

    def test_dropped_row_is_recomputed(self, G2, cache_dir):
        cache = TableCache(cache_dir)
        space = cache.character_space(G2, 4)
        full = cache.characters(space, 4)
        _tamper(cache_dir, CacheKind.CHARS, lambda payload: payload.update(rows=payload["rows"][1:]))

        reloaded = TableCache(cache_dir)
        chars = reloaded.characters(space, 4)
        assert reloaded.stats.rejected == 1
        assert len(chars) == len(full)


class TestSigns:
    """Sign tables."""

    def _warm(self, setup, cache_dir):
        cache = TableCache(cache_dir)
        engine = EpsilonEngine(setup.space)
        engine.map_signs(setup.chars.chars)
        cache.store_signs(engine)
        return engine

    def test_preload(self, r3_setup, cache_dir):
        source = self._warm(r3_setup, cache_dir)
        engine = EpsilonEngine(r3_setup.space)
        assert TableCache(cache_dir).preload_signs(engine, r3_setup.chars)
        assert engine.map_signs(r3_setup.chars.chars) == source.map_signs(r3_setup.chars.chars)
        assert engine.computed == 0

    def test_nothing_stored(self, r3_setup, cache_dir):
        assert not TableCache(cache_dir).preload_signs(EpsilonEngine(r3_setup.space), r3_setup.chars)

    def test_bad_sign_value_rejected(self, r3_setup, cache_dir):
        self._warm(r3_setup, cache_dir)

        def zero_first(payload):
            signs = dict(payload["signs"])
            key = sorted(signs)[0]
            signs[key] = [0, 0]
            payload["signs"] = signs
        _tamper(cache_dir, CacheKind.SIGNS, zero_first)

        cache = TableCache(cache_dir)
        engine = EpsilonEngine(r3_setup.space)
        assert not cache.preload_signs(engine, r3_setup.chars)
        assert cache.stats.rejected == 1
        assert engine.export_signs() == {}

    def test_unbalanced_stratum_rejected(self, r3_setup, cache_dir):
        source = self._warm(r3_setup, cache_dir)

        def flip_first(payload):
            signs = dict(payload["signs"])
            key = sorted(signs)[0]
            signs[key] = [-signs[key][0], -signs[key][1]]
            payload["signs"] = signs
        _tamper(cache_dir, CacheKind.SIGNS, flip_first)

        cache = TableCache(cache_dir)
        engine = EpsilonEngine(r3_setup.space)
        assert not cache.preload_signs(engine, r3_setup.chars)
        # recomputed values agree with the untampered table
        assert engine.map_signs(r3_setup.chars.chars) == source.map_signs(r3_setup.chars.chars)
