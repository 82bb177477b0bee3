"""Seeded synthetic corpora and lexicons for tests, demos, and benchmarks.

Generated sentences follow a fixed scheme the deterministic stubs can
exploit: every positive instance contains exactly one lowercase trigger
token outside the entity spans, entity name tokens are capitalized and
never collide with triggers or filler words, and the (subject, object)
name pair is unique per instance.  That makes the context-reader stub
correct on every instance and the memorizer stub trainable to
perfection on the generated corpus.
"""

from __future__ import annotations

import random
from pathlib import Path
from typing import Mapping

from .corpus import ORGANIZATION, PERSON, NO_RELATION, REInstance
from .lexicon import EntityLexicon, EntityName

#: trigger token -> (relation, subject type, object type)
DEFAULT_SCHEMA: dict[str, tuple[str, str, str]] = {
    "works": ("per:employee_of", PERSON, ORGANIZATION),
    "founded": ("org:founded_by", ORGANIZATION, PERSON),
    "married": ("per:spouse", PERSON, PERSON),
    "acquired": ("org:acquired_by", ORGANIZATION, ORGANIZATION),
}

FILLER = (
    "the", "a", "report", "said", "that", "on", "yesterday", "before",
    "according", "to", "officials", "while", "in", "again", ".",
)


def default_trigger_map() -> dict[str, str]:
    """Trigger-token to relation map matching the generated corpora."""
    return {trigger: rel for trigger, (rel, _, _) in DEFAULT_SCHEMA.items()}


def corpus_person_name(i: int) -> EntityName:
    return (f"Person{i:05d}", f"Orig{i:05d}")


def corpus_org_name(i: int) -> EntityName:
    return (f"Group{i:05d}",) if i % 2 else (f"Org{i:05d}", "Inc")


def synthetic_lexicon(n_person: int = 500, n_org: int = 300, prefix: str = "Lex") -> EntityLexicon:
    """Replacement pools disjoint from every generated corpus name."""
    persons = [
        (f"{prefix}First{i:06d}", f"{prefix}Last{i:06d}") if i % 3 else (f"{prefix}P{i:06d}",)
        for i in range(n_person)
    ]
    orgs = [
        (f"{prefix}Org{i:06d}", "Corp") if i % 2 else (f"{prefix}O{i:06d}",)
        for i in range(n_org)
    ]
    return EntityLexicon({PERSON: persons, ORGANIZATION: orgs})


def write_lexicon_files(
    lexicon: EntityLexicon, person_path: str | Path, org_path: str | Path
) -> None:
    Path(person_path).write_text(
        "".join(" ".join(name) + "\n" for name in lexicon.pools[PERSON]), encoding="utf-8"
    )
    Path(org_path).write_text(
        "".join(" ".join(name) + "\n" for name in lexicon.pools[ORGANIZATION]),
        encoding="utf-8",
    )


def _name_for(kind: str, i: int) -> EntityName:
    return corpus_person_name(i) if kind == PERSON else corpus_org_name(i)


def synthetic_corpus(
    n: int,
    seed: int = 0,
    *,
    no_relation_fraction: float = 0.2,
    n_ineligible: int = 0,
    schema: Mapping[str, tuple[str, str, str]] = DEFAULT_SCHEMA,
    id_prefix: str = "synth",
) -> list[REInstance]:
    """Generate ``n`` instances (the last ``n_ineligible`` of which have
    no replaceable role, for filter tests)."""
    rng = random.Random(seed)
    triggers = list(schema)
    instances = []
    for i in range(n):
        ineligible = i >= n - n_ineligible
        if ineligible:
            relation, subj_type, obj_type = NO_RELATION, "DATE", "LOCATION"
            trigger = None
        elif rng.random() < no_relation_fraction:
            relation, subj_type, obj_type = NO_RELATION, PERSON, ORGANIZATION
            trigger = None
        else:
            trigger = rng.choice(triggers)
            relation, subj_type, obj_type = schema[trigger]
        # Distinct indices keep every (subject, object) name pair unique.
        subj_name = _name_for(subj_type, 2 * i) if not ineligible else ("2031-05-01",)
        obj_name = _name_for(obj_type, 2 * i + 1) if not ineligible else ("Westfield",)

        lead = [rng.choice(FILLER) for _ in range(rng.randrange(0, 3))]
        middle = [trigger] if trigger else [rng.choice(FILLER)]
        middle += [rng.choice(FILLER) for _ in range(rng.randrange(0, 2))]
        tail = [rng.choice(FILLER) for _ in range(rng.randrange(1, 3))]

        subject_first = rng.random() < 0.8
        first_name, second_name = (
            (subj_name, obj_name) if subject_first else (obj_name, subj_name)
        )
        tokens = (*lead, *first_name, *middle, *second_name, *tail)
        first_span = (len(lead), len(lead) + len(first_name))
        second_start = first_span[1] + len(middle)
        second_span = (second_start, second_start + len(second_name))
        subj_span, obj_span = (
            (first_span, second_span) if subject_first else (second_span, first_span)
        )
        instances.append(
            REInstance(
                id=f"{id_prefix}-{i:05d}",
                tokens=tokens,
                subj_span=subj_span,
                obj_span=obj_span,
                subj_type=subj_type,
                obj_type=obj_type,
                relation=relation,
            )
        )
    return instances
