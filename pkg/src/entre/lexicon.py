"""Typed pools of replacement entity names with seeded uniform sampling.

Name-list files are newline-delimited UTF-8 strings; each line is one
name, tokenized by whitespace.  Names are stored as token tuples so
multi-token names splice into token-aligned sentences.
"""

from __future__ import annotations

import random
from pathlib import Path
from typing import Iterable, Mapping

from .corpus import ORGANIZATION, PERSON, REPLACEABLE_TYPES

EntityName = tuple[str, ...]


class LexiconError(Exception):
    """Lexicon construction or sampling failure."""


class SamplingExhaustedError(LexiconError):
    """The pool has no candidate left once the excluded name is removed."""


class EntityLexicon:
    """Immutable PERSON/ORGANIZATION name pools.

    Duplicate names (exact token-sequence equality) are dropped keeping
    the first occurrence, which makes construction idempotent and
    order-stable.
    """

    def __init__(self, pools: Mapping[str, Iterable[EntityName]]):
        bad_keys = set(pools) - REPLACEABLE_TYPES
        if bad_keys:
            raise LexiconError(f"unsupported pool keys: {sorted(bad_keys)}")
        self.pools: dict[str, tuple[EntityName, ...]] = {}
        self._index: dict[str, dict[EntityName, int]] = {}
        for tag, names in pools.items():
            seen: dict[EntityName, int] = {}
            for name in names:
                name = tuple(name)
                if not name or any(tok == "" for tok in name):
                    raise LexiconError(f"{tag} pool contains an empty name or token")
                if name not in seen:
                    seen[name] = len(seen)
            self.pools[tag] = tuple(seen)
            self._index[tag] = seen

    def pool_size(self, tag: str) -> int:
        return len(self.pools.get(tag, ()))

    @property
    def counts(self) -> dict[str, int]:
        return {tag: len(names) for tag, names in sorted(self.pools.items())}

    def sample_name(
        self,
        tag: str,
        exclude: EntityName | None = None,
        rng: random.Random | None = None,
    ) -> EntityName:
        """Uniform draw from the ``tag`` pool, never returning ``exclude``.

        Deterministic given the rng state.  Raises
        :class:`SamplingExhaustedError` when the pool minus the excluded
        name is empty.
        """
        if tag not in self.pools:
            raise LexiconError(f"no pool for entity type {tag!r}")
        pool = self.pools[tag]
        rng = rng if rng is not None else random
        exclude = tuple(exclude) if exclude is not None else None
        skip = self._index[tag].get(exclude) if exclude is not None else None
        if skip is None:
            return pool[rng.randrange(len(pool))]
        if len(pool) < 2:
            raise SamplingExhaustedError(
                f"{tag} pool has no candidate other than {' '.join(exclude)}"
            )
        # Draw from the n-1 names that are not the excluded one.
        j = rng.randrange(len(pool) - 1)
        if j >= skip:
            j += 1
        return pool[j]


def _read_name_file(path: str | Path) -> list[EntityName]:
    names = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        tokens = tuple(line.split())
        if tokens:
            names.append(tokens)
    return names


def build_lexicon(person_file: str | Path, org_file: str | Path) -> EntityLexicon:
    """Build a lexicon from two newline-delimited name-list files."""
    lexicon = EntityLexicon(
        {
            PERSON: _read_name_file(person_file),
            ORGANIZATION: _read_name_file(org_file),
        }
    )
    for tag in (PERSON, ORGANIZATION):
        if lexicon.pool_size(tag) == 0:
            raise LexiconError(f"{tag} pool is empty after deduplication")
    return lexicon
