"""Bridge configuration."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

TASKS = ("relation", "ner")


@dataclass
class BridgeConfig:
    """How to load and drive one model behind the wire protocol.

    ``model`` is any identifier ``from_pretrained`` accepts (a local
    checkpoint directory or a hub id).  ``label_map`` optionally points
    at a JSON object mapping model labels (after stripping B-/I-
    prefixes, for NER) to protocol labels; unmapped labels pass through
    unchanged.
    """

    model: str
    task: str = "relation"
    device: str = "cpu"
    batch_size: int = 32
    max_length: int = 256
    label_map: str | None = None

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def load_label_map(self) -> dict[str, str]:
        if self.label_map is None:
            return {}
        mapping = json.loads(Path(self.label_map).read_text(encoding="utf-8"))
        if not isinstance(mapping, dict):
            raise ValueError("label map file must contain a JSON object")
        return {str(k): str(v) for k, v in mapping.items()}
