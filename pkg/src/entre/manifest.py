"""Run manifests: reproducibility records written next to pipeline outputs."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__

SCHEMA_VERSION = 1
MANIFEST_NAME = "manifest.json"


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return "sha256:" + digest.hexdigest()


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    """Everything needed to reproduce or verify one CLI run."""

    command: str
    config: dict
    seed: int | None = None
    oracle: str | None = None
    inputs: dict[str, dict] = field(default_factory=dict)
    outputs: dict[str, dict] = field(default_factory=dict)
    started_at: str = field(default_factory=utc_now)
    finished_at: str | None = None

    def add_input(self, name: str, path: str | Path) -> None:
        self.inputs[name] = {"path": str(path), "sha256": sha256_file(path)}

    def add_output(self, name: str, path: str | Path) -> None:
        self.outputs[name] = {"path": str(path), "sha256": sha256_file(path)}

    def to_json(self) -> dict:
        return {
            "tool": "entre",
            "version": __version__,
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "config": dict(sorted(self.config.items())),
            "seed": self.seed,
            "oracle": self.oracle,
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": dict(sorted(self.outputs.items())),
            "started_at": self.started_at,
            "finished_at": self.finished_at,
        }

    def write(self, directory: str | Path) -> Path:
        """Write ``manifest.json`` into the output directory (one per dir)."""
        self.finished_at = utc_now()
        path = Path(directory) / MANIFEST_NAME
        path.write_text(
            json.dumps(self.to_json(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        return path


def load_manifest(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def verify_digests(manifest: dict) -> list[str]:
    """Recompute all recorded digests; returns mismatch descriptions."""
    problems = []
    for section in ("inputs", "outputs"):
        for name, entry in manifest.get(section, {}).items():
            actual = sha256_file(entry["path"])
            if actual != entry["sha256"]:
                problems.append(f"{section}.{name}: {entry['sha256']} != {actual}")
    return problems
