"""
Per-extension working state shared by the command runners.
"""

import logging
import time
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, List, Optional, Tuple

from app.calculations.census import build_S_sets
from app.calculations.characters import CharacterSpace, CharSet, MultChar
from app.calculations.epsilon import EpsilonEngine
from app.calculations.padic import QuadExt, make_extension
from app.commands.documents import RunConfig
from app.services.cache import TableCache

logger = logging.getLogger(__name__)


@dataclass
class Workspace:
    """An extension with its character space, enumeration and epsilon engine."""

    ext: QuadExt
    space: CharacterSpace
    chars: CharSet
    engine: EpsilonEngine
    cache: TableCache
    timings: Dict[str, float] = field(default_factory=dict)

    @cached_property
    def strata(self) -> Dict[int, Tuple[List[MultChar], List[MultChar]]]:
        started = time.perf_counter()
        strata = build_S_sets(self.engine, self.chars)
        self.timings["strata"] = round(time.perf_counter() - started, 3)
        return strata

    def close(self) -> None:
        """Write the sign table back to the cache."""
        self.cache.store_signs(self.engine)


def open_workspace(config: RunConfig, tag: str, cache: TableCache,
                   flip: Optional[Callable[[MultChar], bool]] = None) -> Workspace:
    """
    Build (or load) everything a command needs for one extension.

    Raises:
        CatalogError: If the tag is not in the catalog for p
        LevelPolicyError: If the working level exceeds the policy
    """
    started = time.perf_counter()
    ext = make_extension(config.p, tag, config.precision)
    space = cache.character_space(ext, config.working_level)
    chars = cache.characters(space, config.n_max)
    engine = EpsilonEngine(space, config.dps, config.max_dps, config.workers, flip)
    cache.preload_signs(engine, chars)
    elapsed = round(time.perf_counter() - started, 3)
    logger.info(f"{ext.tag} (p={ext.p}): workspace at level {space.level} ready in {elapsed}s, "
                f"{len(chars)} characters")
    return Workspace(ext, space, chars, engine, cache, {"tables": elapsed})
