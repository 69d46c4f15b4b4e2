"""Model manifest: logical names mapped to checkpoint identifiers.

Clients speak logical names (``roberta``, ``bart``, ...); the manifest maps
each to a local path or hub identifier so deployments never leak checkpoint
locations into the toolkit that calls this service.

Format::

    {
      "models": [
        {"name": "roberta", "kind": "encoder", "checkpoint": "/path/or/id"},
        {"name": "bart", "kind": "summarizer", "checkpoint": "/path/or/id"}
      ]
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

KINDS = ("encoder", "summarizer")


@dataclass(frozen=True)
class ModelSpec:
    name: str
    kind: str
    checkpoint: str


def load_manifest(path: Path | str) -> list[ModelSpec]:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    entries = raw.get("models")
    if not isinstance(entries, list):
        raise ValueError("manifest must hold a 'models' list")
    specs = []
    names = set()
    for entry in entries:
        name, kind, checkpoint = entry.get("name"), entry.get("kind"), entry.get("checkpoint")
        if not name or kind not in KINDS or not checkpoint:
            raise ValueError(f"bad manifest entry: {entry!r}")
        if name in names:
            raise ValueError(f"duplicate model name {name!r}")
        names.add(name)
        specs.append(ModelSpec(name=name, kind=kind, checkpoint=checkpoint))
    return specs
