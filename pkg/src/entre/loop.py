"""Adversarial entity-replacement loop producing the challenged corpus.

Each iteration queries the oracle, selects still-unbroken instances,
and resamples every eligible entity of the selected ones.  Predictions
for untouched instances are cached between iterations: the oracle is
assumed deterministic (the determinism contract below depends on it),
so only replaced instances need re-querying.  That cache is what makes
the fast selection mode cheap - it replaces far fewer instances per
round, hence re-queries far fewer.

Determinism: given the same instances, lexicon, seed, and a
deterministic oracle, two runs produce identical corpora and traces.
Per-replacement randomness comes from a seed derived by hashing
(seed, instance id, iteration, role), so it is independent of
processing order.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

from .corpus import NO_RELATION, REPLACEABLE_TYPES, REInstance, Role
from .lexicon import EntityLexicon, SamplingExhaustedError
from .oracle.client import OracleClient
from .replace import ReplacementRecord, replace_entity

logger = logging.getLogger(__name__)


class PipelineError(Exception):
    """The loop's inputs are inconsistent (e.g. a prediction is missing)."""


class SelectionMode(str, Enum):
    FULL = "full"
    FAST = "fast"


@dataclass
class LoopConfig:
    max_iterations: int = 200
    mode: SelectionMode = SelectionMode.FULL
    seed: int = 0
    #: Replace every eligible entity once, unconditionally, before the loop.
    initial_pass: bool = False
    eligible_roles: tuple[Role, ...] = ("subject", "object")
    #: FULL mode: also select instances whose gold and prediction are both
    #: no_relation.  Replacing them cannot lower measured F1 but raises
    #: name diversity; on by default to match exact-match selection.
    include_no_relation_matches: bool = True

    def __post_init__(self) -> None:
        self.mode = SelectionMode(self.mode)
        self.eligible_roles = tuple(self.eligible_roles)
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        bad = set(self.eligible_roles) - {"subject", "object"}
        if bad:
            raise ValueError(f"unknown roles: {sorted(bad)}")

    def to_json(self) -> dict:
        return {
            "max_iterations": self.max_iterations,
            "mode": self.mode.value,
            "seed": self.seed,
            "initial_pass": self.initial_pass,
            "eligible_roles": list(self.eligible_roles),
            "include_no_relation_matches": self.include_no_relation_matches,
        }


@dataclass
class IterationTrace:
    iteration: int
    n_selected: int
    n_oracle_requests: int
    n_oracle_batches: int
    replacements: list[ReplacementRecord] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "iteration": self.iteration,
            "n_selected": self.n_selected,
            "n_oracle_requests": self.n_oracle_requests,
            "n_oracle_batches": self.n_oracle_batches,
            "replacements": [r.to_json() for r in self.replacements],
        }


@dataclass
class LoopTrace:
    """Complete audit record of one loop run."""

    config: LoopConfig
    iterations: list[IterationTrace] = field(default_factory=list)
    last_change: dict[str, int] = field(default_factory=dict)

    @property
    def total_oracle_requests(self) -> int:
        return sum(it.n_oracle_requests for it in self.iterations)

    @property
    def total_oracle_batches(self) -> int:
        return sum(it.n_oracle_batches for it in self.iterations)

    @property
    def total_replacements(self) -> int:
        return sum(len(it.replacements) for it in self.iterations)

    def to_json(self) -> dict:
        return {
            "config": self.config.to_json(),
            "iterations": [it.to_json() for it in self.iterations],
            "last_change": dict(sorted(self.last_change.items())),
            "totals": {
                "oracle_requests": self.total_oracle_requests,
                "oracle_batches": self.total_oracle_batches,
                "replacements": self.total_replacements,
            },
        }

    def write(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json(), sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )


def select_targets(
    instances: Sequence[REInstance],
    predictions: Mapping[str, str],
    mode: SelectionMode | str,
    *,
    include_no_relation_matches: bool = True,
) -> list[str]:
    """Ids of instances whose names should be resampled this iteration.

    FULL selects exact prediction/gold matches (gold labels consulted);
    FAST selects every instance not predicted no_relation, which needs
    no gold labels at all.
    """
    mode = SelectionMode(mode)
    selected = []
    for inst in instances:
        if inst.id not in predictions:
            raise PipelineError(f"no prediction for instance {inst.id!r}")
        pred = predictions[inst.id]
        if mode is SelectionMode.FAST:
            if pred != NO_RELATION:
                selected.append(inst.id)
        else:
            if pred == inst.relation and (
                include_no_relation_matches or inst.relation != NO_RELATION
            ):
                selected.append(inst.id)
    return selected


def derive_rng(seed: int, instance_id: str, iteration: int, role: str) -> random.Random:
    """Order-independent per-replacement RNG; stable across platforms."""
    key = f"{seed}|{instance_id}|{iteration}|{role}".encode("utf-8")
    digest = hashlib.sha256(key).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def _replace_roles(
    inst: REInstance,
    lexicon: EntityLexicon,
    config: LoopConfig,
    iteration: int,
    frozen: set[tuple[str, Role]],
) -> tuple[REInstance, list[ReplacementRecord]]:
    records = []
    for role in config.eligible_roles:
        if inst.type_for(role) not in REPLACEABLE_TYPES:
            continue
        if (inst.id, role) in frozen:
            continue
        old_name = inst.name_for(role)
        rng = derive_rng(config.seed, inst.id, iteration, role)
        try:
            new_name = lexicon.sample_name(inst.type_for(role), exclude=old_name, rng=rng)
        except SamplingExhaustedError:
            logger.warning(
                "lexicon exhausted for %s %s of %s; freezing", inst.type_for(role), role, inst.id
            )
            frozen.add((inst.id, role))
            continue
        inst = replace_entity(inst, role, new_name)
        records.append(
            ReplacementRecord(
                instance_id=inst.id,
                role=role,
                old_name=old_name,
                new_name=new_name,
                iteration=iteration,
            )
        )
    return inst, records


def run_entre(
    instances: Sequence[REInstance],
    lexicon: EntityLexicon,
    client: OracleClient,
    config: LoopConfig | None = None,
) -> tuple[list[REInstance], LoopTrace]:
    """Run the replacement loop; returns the final corpus and its trace.

    The output contains every input instance exactly once, in input
    order, in its final state.  Instances are expected to be
    eligibility-filtered already; ineligible roles are skipped, not
    errors.  Stops early as soon as an iteration selects nothing.
    """
    config = config or LoopConfig()
    ids = [inst.id for inst in instances]
    if len(set(ids)) != len(ids):
        raise PipelineError("instance ids must be unique")
    current: dict[str, REInstance] = {inst.id: inst for inst in instances}
    trace = LoopTrace(config=config)
    frozen: set[tuple[str, Role]] = set()
    predictions: dict[str, str] = {}
    stale: set[str] = set(ids)

    if config.initial_pass:
        entry = IterationTrace(iteration=0, n_selected=len(ids), n_oracle_requests=0,
                               n_oracle_batches=0)
        for iid in ids:
            new_inst, records = _replace_roles(current[iid], lexicon, config, 0, frozen)
            if records:
                current[iid] = new_inst
                trace.last_change[iid] = 0
                entry.replacements.extend(records)
        trace.iterations.append(entry)

    for iteration in range(1, config.max_iterations + 1):
        to_query = [current[iid] for iid in ids if iid in stale]
        batches_before = client.n_batches
        predictions.update(client.predict_labels(to_query))
        stale.clear()
        targets = select_targets(
            [current[iid] for iid in ids],
            predictions,
            config.mode,
            include_no_relation_matches=config.include_no_relation_matches,
        )
        entry = IterationTrace(
            iteration=iteration,
            n_selected=len(targets),
            n_oracle_requests=len(to_query),
            n_oracle_batches=client.n_batches - batches_before,
        )
        trace.iterations.append(entry)
        if not targets:
            break
        for iid in targets:
            new_inst, records = _replace_roles(current[iid], lexicon, config, iteration, frozen)
            if records:
                current[iid] = new_inst
                trace.last_change[iid] = iteration
                stale.add(iid)
                entry.replacements.extend(records)

    return [current[iid] for iid in ids], trace


def estimate_saved_calls(trace_full: LoopTrace, trace_fast: LoopTrace) -> float:
    """Fraction of oracle requests the fast mode avoided: 1 - fast/full."""
    full = trace_full.total_oracle_requests
    fast = trace_fast.total_oracle_requests
    if full == 0:
        raise ValueError("full trace made no oracle requests")
    return 1.0 - fast / full


def load_trace(path: str | Path) -> dict:
    """Read a trace file back as plain JSON (for reports and tooling)."""
    return json.loads(Path(path).read_text(encoding="utf-8"))


def expected_batches(n_requests: int, batch_size: int) -> int:
    return math.ceil(n_requests / batch_size) if n_requests else 0
