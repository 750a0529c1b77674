"""
Persistent table cache.

Stores, per (p, tag, level, format version):

* the unit-quotient basis (generators and their orders),
* the exponent rows of the enumerated characters,
* the certified epsilon signs, keyed by character encoding.

Nothing is trusted on load. A basis must span U/U^n exactly once, the
character rows must pass the enumeration checks, and sign tables must
satisfy eps(chi^-1) = omega(-1) eps(chi) and |S(l)| = |S'(l)|. An entry
that fails is logged, dropped and recomputed.
"""

import hashlib
import json
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

from app.calculations.characters import (
    CharacterSpace,
    CharSet,
    char_rows,
    character_space,
    charset_from_rows,
    enumerate_chars,
    format_char,
    parse_char,
)
from app.calculations.epsilon import EpsilonEngine
from app.calculations.errors import CacheIntegrityError, InvariantError
from app.calculations.padic import QuadExt
from app.calculations.quotients import unit_quotient
from app.config import get_settings
from app.db.database import get_db_context
from app.db.models import CacheEntry, CacheKind

logger = logging.getLogger(__name__)


def deterministic_cache_key(canonical: Dict[str, Any], format_version: int) -> str:
    """sha256 over the sorted-key JSON of the key fields and the format version."""
    canonical_json = json.dumps(canonical, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(f"{format_version}:{canonical_json}".encode("utf-8")).hexdigest()


@dataclass
class CacheStats:
    hits: int = 0
    misses: int = 0
    rejected: int = 0
    stored: int = 0

    def as_dict(self) -> Dict[str, int]:
        return {"hits": self.hits, "misses": self.misses, "rejected": self.rejected, "stored": self.stored}


class TableCache:
    """
    Load-or-compute access to group, character and sign tables.

    With enabled=False every table is computed and nothing is written;
    results are the same either way.
    """

    def __init__(self, cache_dir: Optional[str] = None, format_version: Optional[int] = None,
                 enabled: bool = True):
        settings = get_settings()
        self.cache_dir = cache_dir or settings.cache_dir
        self.format_version = format_version if format_version is not None else settings.format_version
        self.enabled = enabled
        self.stats = CacheStats()

    # ------------------------------------------------------------------
    # raw entries

    def key(self, ext: QuadExt, level: int, kind: str) -> str:
        return deterministic_cache_key(
            {"p": ext.p, "tag": ext.tag, "level": level, "kind": kind, "x0": list(ext.x0_coords)},
            self.format_version,
        )

    def _load(self, ext: QuadExt, level: int, kind: str) -> Optional[Dict[str, Any]]:
        if not self.enabled:
            return None
        cache_key = self.key(ext, level, kind)
        with get_db_context(self.cache_dir) as db:
            entry = db.query(CacheEntry).filter(CacheEntry.cache_key == cache_key).first()
            if entry is None:
                self.stats.misses += 1
                logger.info(f"cache miss: {kind} p={ext.p} {ext.tag} n={level}")
                return None
            if entry.format_version != self.format_version:
                self.stats.rejected += 1
                logger.warning(
                    f"cache entry {kind} p={ext.p} {ext.tag} n={level} has format "
                    f"v{entry.format_version}, expected v{self.format_version}; recomputing"
                )
                return None
            payload = entry.payload
        if not isinstance(payload, dict):
            self._reject(ext, level, kind, "payload is not an object")
            return None
        self.stats.hits += 1
        logger.info(f"cache hit: {kind} p={ext.p} {ext.tag} n={level}")
        return payload

    def _store(self, ext: QuadExt, level: int, kind: str, payload: Dict[str, Any]) -> None:
        if not self.enabled:
            return
        cache_key = self.key(ext, level, kind)
        with get_db_context(self.cache_dir) as db:
            entry = db.query(CacheEntry).filter(CacheEntry.cache_key == cache_key).first()
            if entry is None:
                entry = CacheEntry(cache_key=cache_key, p=ext.p, tag=ext.tag, level=level, kind=kind)
                db.add(entry)
            entry.format_version = self.format_version
            entry.payload = payload
        self.stats.stored += 1
        logger.debug(f"cache store: {kind} p={ext.p} {ext.tag} n={level}")

    def _reject(self, ext: QuadExt, level: int, kind: str, reason: str) -> None:
        self.stats.rejected += 1
        logger.warning(f"cache entry {kind} p={ext.p} {ext.tag} n={level} rejected ({reason}); recomputing")

    # ------------------------------------------------------------------
    # tables

    def character_space(self, ext: QuadExt, level: int) -> CharacterSpace:
        """The character space at level, with its basis from the cache when valid."""
        payload = self._load(ext, level, CacheKind.BASIS)
        if payload is not None:
            try:
                basis = _basis_from_payload(payload)
                return character_space(ext, level, unit_quotient(ext, level, basis))
            except (CacheIntegrityError, InvariantError) as exc:
                self._reject(ext, level, CacheKind.BASIS, str(exc))
        space = character_space(ext, level)
        self._store(ext, level, CacheKind.BASIS, {
            "generators": [list(g) for g in space.group.generators],
            "orders": list(space.group.orders),
        })
        return space

    def characters(self, space: CharacterSpace, n_max: int) -> CharSet:
        """All chi with chi|F* = omega up to n_max, from stored rows when they check out."""
        ext = space.ext
        payload = self._load(ext, space.level, CacheKind.CHARS)
        if payload is not None:
            try:
                if int(payload.get("n_max", -1)) != n_max:
                    raise CacheIntegrityError(f"rows cover n_max={payload.get('n_max')}, need {n_max}")
                return charset_from_rows(space, n_max, payload["rows"])
            except (CacheIntegrityError, InvariantError, KeyError, TypeError, ValueError) as exc:
                self._reject(ext, space.level, CacheKind.CHARS, str(exc))
        chars = enumerate_chars(ext, n_max, space)
        self._store(ext, space.level, CacheKind.CHARS, {"n_max": n_max, "rows": char_rows(chars)})
        return chars

    def preload_signs(self, engine: EpsilonEngine, chars: CharSet) -> bool:
        """Seed the engine's sign memo from the cache; False when nothing usable is stored."""
        ext = engine.ext
        payload = self._load(ext, engine.space.level, CacheKind.SIGNS)
        if payload is None:
            return False
        try:
            records = _signs_from_payload(payload, engine, chars)
        except (CacheIntegrityError, KeyError, TypeError, ValueError) as exc:
            self._reject(ext, engine.space.level, CacheKind.SIGNS, str(exc))
            return False
        engine.preload(records)
        return True

    def store_signs(self, engine: EpsilonEngine) -> None:
        signs = engine.export_signs()
        self._store(engine.ext, engine.space.level, CacheKind.SIGNS,
                    {"signs": {k: [int(a), int(b)] for k, (a, b) in signs.items()}})


def _basis_from_payload(payload: Dict[str, Any]) -> Tuple[List[Tuple[int, int]], List[int]]:
    try:
        generators = [(int(g[0]), int(g[1])) for g in payload["generators"]]
        orders = [int(o) for o in payload["orders"]]
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise CacheIntegrityError(f"malformed basis payload: {exc}") from exc
    return generators, orders


def _signs_from_payload(payload: Dict[str, Any], engine: EpsilonEngine,
                        chars: CharSet) -> Dict[str, Tuple[int, int]]:
    """
    Raises:
        CacheIntegrityError: If a sign is not +-1, breaks the omega(-1)
            relation, or the stored signs of one stratum do not pair up
    """
    omega_minus_one = engine.space.omega.at_minus_one
    records: Dict[str, Tuple[int, int]] = {}
    for key, value in payload["signs"].items():
        inverse, direct = int(value[0]), int(value[1])
        if inverse not in (1, -1) or direct not in (1, -1):
            raise CacheIntegrityError(f"sign of {key} is not +-1")
        if inverse != omega_minus_one * direct:
            raise CacheIntegrityError(f"stored signs of {key} break eps(chi^-1) = omega(-1) eps(chi)")
        parse_char(key, engine.space)
        records[key] = (inverse, direct)

    if engine.ext.ramified:
        tally: Dict[int, List[int]] = {}
        complete: Dict[int, bool] = {}
        for chi in chars.chars:
            l = chars.conductor(chi)
            record = records.get(format_char(chi))
            if record is None:
                complete[l] = False
                continue
            complete.setdefault(l, True)
            pair = tally.setdefault(l, [0, 0])
            pair[0 if record[0] == 1 else 1] += 1
        for l, (plus, minus) in tally.items():
            if complete.get(l) and plus != minus:
                raise CacheIntegrityError(f"stored signs give |S({l})| = {plus} but |S'({l})| = {minus}")
    return records
