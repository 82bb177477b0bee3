"""Span-exact entity replacement plus mask baselines and counterfactuals.

All transforms are pure functions on immutable instances, keep the gold
relation label untouched, and return instances whose span invariants
were re-checked at construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .corpus import REPLACEABLE_TYPES, REInstance, Role
from .lexicon import EntityName

DEFAULT_MASK_TOKEN = "[MASK]"
SEPARATOR_TOKEN = "[SEP]"


class EligibilityError(Exception):
    """The targeted role's entity type is not replaceable."""


class MaskMode(str, Enum):
    """Entity-mask baseline variants."""

    NO_NAME_NO_TYPE = "no_name_no_type"
    NO_NAME_WITH_TYPE = "no_name_with_type"
    WITH_NAME_WITH_TYPE = "with_name_with_type"


class ContextMaskMode(str, Enum):
    """How the counterfactual input removes textual context."""

    PRESERVE_POSITIONS = "preserve_positions"
    ENTITIES_ONLY = "entities_only"


@dataclass(frozen=True)
class ReplacementRecord:
    """Provenance of one name swap; iteration 0 marks the unconditional
    initial pass, loop iterations count from 1."""

    instance_id: str
    role: Role
    old_name: EntityName
    new_name: EntityName
    iteration: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "old_name", tuple(self.old_name))
        object.__setattr__(self, "new_name", tuple(self.new_name))
        if self.old_name == self.new_name:
            raise ValueError(f"replacement of {self.instance_id} is a no-op")
        if self.iteration < 0:
            raise ValueError("iteration must be >= 0")

    def to_json(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "role": self.role,
            "old_name": list(self.old_name),
            "new_name": list(self.new_name),
            "iteration": self.iteration,
        }

    @classmethod
    def from_json(cls, d: dict) -> "ReplacementRecord":
        return cls(
            instance_id=d["instance_id"],
            role=d["role"],
            old_name=tuple(d["old_name"]),
            new_name=tuple(d["new_name"]),
            iteration=d["iteration"],
        )


Edit = tuple[int, int, EntityName]


def _apply_edits(
    tokens: tuple[str, ...], edits: list[Edit]
) -> tuple[tuple[str, ...], list[int]]:
    """Rebuild tokens under sorted non-overlapping edits.

    Returns the new token tuple and, per edit, the index where its
    replacement starts in the output.
    """
    out: list[str] = []
    cursor = 0
    starts: list[int] = []
    for start, end, repl in edits:
        out.extend(tokens[cursor:start])
        starts.append(len(out))
        out.extend(repl)
        cursor = end
    out.extend(tokens[cursor:])
    return tuple(out), starts


def _remap_point(pos: int, edits: list[Edit]) -> int:
    """New index of an original position lying outside every edit."""
    delta = 0
    for start, end, repl in edits:
        if end <= pos:
            delta += len(repl) - (end - start)
    return pos + delta


def _free_occurrences(instance: REInstance, name: EntityName) -> list[int]:
    """Start indices of exact ``name`` matches outside both entity spans."""
    n, k = len(instance.tokens), len(name)
    blocked = [False] * n
    for start, end in (instance.subj_span, instance.obj_span):
        for i in range(start, end):
            blocked[i] = True
    found: list[int] = []
    i = 0
    while i + k <= n:
        if instance.tokens[i : i + k] == name and not any(blocked[i : i + k]):
            found.append(i)
            i += k
        else:
            i += 1
    return found


def replace_entity(
    instance: REInstance,
    role: Role,
    new_name: EntityName,
    *,
    rewrite_coreferent: bool = False,
) -> REInstance:
    """Replace the ``role`` entity's tokens with ``new_name``.

    Only PERSON/ORGANIZATION roles are eligible.  The other span is
    shifted by the length difference when it starts at or after the end
    of the rewritten one, else left untouched.  With
    ``rewrite_coreferent`` other exact occurrences of the old name
    outside both entity spans are rewritten too (off by default: only
    the annotated span is touched).
    """
    new_name = tuple(new_name)
    if not new_name or any(tok == "" for tok in new_name):
        raise ValueError("new_name must be a non-empty list of non-empty tokens")
    if instance.type_for(role) not in REPLACEABLE_TYPES:
        raise EligibilityError(
            f"{role} of {instance.id} has type {instance.type_for(role)!r}; "
            f"only {sorted(REPLACEABLE_TYPES)} are replaceable"
        )
    old_start, old_end = instance.span_for(role)
    old_name = instance.name_for(role)

    edits: list[Edit] = [(old_start, old_end, new_name)]
    if rewrite_coreferent and old_name != new_name:
        edits.extend(
            (start, start + len(old_name), new_name)
            for start in _free_occurrences(instance, old_name)
        )
    edits.sort(key=lambda e: e[0])
    role_edit = edits.index((old_start, old_end, new_name))

    tokens, starts = _apply_edits(instance.tokens, edits)
    role_span = (starts[role_edit], starts[role_edit] + len(new_name))

    other_role: Role = "object" if role == "subject" else "subject"
    other_start, other_end = instance.span_for(other_role)
    mapped = _remap_point(other_start, edits)
    other_span = (mapped, mapped + (other_end - other_start))

    if role == "subject":
        subj_span, obj_span = role_span, other_span
    else:
        subj_span, obj_span = other_span, role_span
    return instance.replaced(tokens=tokens, subj_span=subj_span, obj_span=obj_span)


def subj_marker(entity_type: str) -> str:
    return f"[SUBJ-{entity_type}]"


def obj_marker(entity_type: str) -> str:
    return f"[OBJ-{entity_type}]"


def apply_entity_mask(instance: REInstance, mode: MaskMode | str) -> REInstance:
    """Apply one of the entity-mask baseline transforms.

    NO_NAME modes collapse each entity span to a single placeholder
    token and are idempotent; WITH_NAME_WITH_TYPE inserts a type marker
    token in front of the untouched name (the span grows to cover it).
    """
    mode = MaskMode(mode)
    if mode is MaskMode.NO_NAME_NO_TYPE:
        subj_repl: EntityName = ("[SUBJ]",)
        obj_repl: EntityName = ("[OBJ]",)
    elif mode is MaskMode.NO_NAME_WITH_TYPE:
        subj_repl = (subj_marker(instance.subj_type),)
        obj_repl = (obj_marker(instance.obj_type),)
    else:
        subj_repl = (subj_marker(instance.subj_type),) + instance.subject_name
        obj_repl = (obj_marker(instance.obj_type),) + instance.object_name

    edits: list[tuple[int, int, EntityName, Role]] = sorted(
        [
            (*instance.subj_span, subj_repl, "subject"),
            (*instance.obj_span, obj_repl, "object"),
        ]
    )
    tokens, starts = _apply_edits(instance.tokens, [e[:3] for e in edits])
    spans = {
        role: (start, start + len(repl))
        for (_, _, repl, role), start in zip(edits, starts)
    }
    return instance.replaced(
        tokens=tokens, subj_span=spans["subject"], obj_span=spans["object"]
    )


def mask_context(
    instance: REInstance,
    mask_token: str = DEFAULT_MASK_TOKEN,
    mode: ContextMaskMode | str = ContextMaskMode.PRESERVE_POSITIONS,
) -> REInstance:
    """Build the counterfactual input: context removed, entities kept.

    ``preserve_positions`` rewrites every token outside both entity
    spans to ``mask_token`` (spans unchanged); ``entities_only`` reduces
    the sentence to ``subject ++ [SEP] ++ object`` with spans recomputed.
    """
    mode = ContextMaskMode(mode)
    if mode is ContextMaskMode.PRESERVE_POSITIONS:
        inside = [False] * len(instance.tokens)
        for start, end in (instance.subj_span, instance.obj_span):
            for i in range(start, end):
                inside[i] = True
        tokens = tuple(
            tok if inside[i] else mask_token for i, tok in enumerate(instance.tokens)
        )
        return instance.replaced(tokens=tokens)
    subj, obj = instance.subject_name, instance.object_name
    tokens = subj + (SEPARATOR_TOKEN,) + obj
    return instance.replaced(
        tokens=tokens,
        subj_span=(0, len(subj)),
        obj_span=(len(subj) + 1, len(subj) + 1 + len(obj)),
    )
