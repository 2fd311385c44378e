"""Run manifests: enough provenance to re-run a command bit-identically."""

from __future__ import annotations

import hashlib
import json
import time
from datetime import datetime, timezone
from pathlib import Path

from . import __version__


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def config_hash(params: dict) -> str:
    canonical = json.dumps(params, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class RunManifest:
    """Collects command, config, input checksums, seed and timings."""

    def __init__(self, command: str, params: dict, seed: int | None = None):
        self.command = command
        self.params = dict(params)
        self.seed = seed
        self.inputs: dict[str, str] = {}
        self.outputs: list[str] = []
        self.started_at = datetime.now(timezone.utc).isoformat()
        self._t0 = time.monotonic()

    def add_input(self, path) -> None:
        if path:
            p = Path(path)
            if p.is_file():
                self.inputs[str(p)] = _sha256_file(p)

    def add_output(self, path) -> None:
        if path:
            self.outputs.append(str(path))

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "tool_version": __version__,
            "params": self.params,
            "config_hash": config_hash(self.params),
            "seed": self.seed,
            "inputs": self.inputs,
            "outputs": list(self.outputs),
            "started_at": self.started_at,
            "duration_s": round(time.monotonic() - self._t0, 6),
        }

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")
        return path

    def write_alongside(self, output_path) -> Path:
        out = Path(str(output_path) + ".manifest.json")
        return self.write(out)
