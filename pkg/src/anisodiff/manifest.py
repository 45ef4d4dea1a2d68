"""Run manifests: config echo, artifact checksums, reproducibility record."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .errors import ConfigError

MANIFEST_NAME = "manifest.json"


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class ArtifactWriter:
    """Single writer per output directory; tracks checksums as it goes."""

    def __init__(self, outdir: Path):
        self.outdir = Path(outdir)
        self.outdir.mkdir(parents=True, exist_ok=True)
        self.artifacts: dict[str, str] = {}

    def write_text(self, name: str, text: str) -> Path:
        path = self.outdir / name
        path.write_text(text)
        self.artifacts[name] = sha256_file(path)
        return path

    def write_manifest(self, experiment: str, config_doc: dict,
                       duration_s: float, seeds, version: str) -> Path:
        payload = {
            "experiment": experiment,
            "config": config_doc,
            "artifacts": dict(sorted(self.artifacts.items())),
            "duration_s": round(duration_s, 3),
            "library_version": version,
            "seeds": list(seeds),
        }
        path = self.outdir / MANIFEST_NAME
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        return path


def load_manifest(path: str | Path) -> dict:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"manifest: cannot read {path} ({exc})") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"manifest: {path} is not valid JSON ({exc})") from exc
    for key in ("experiment", "config", "artifacts"):
        if key not in payload:
            raise ConfigError(f"manifest: missing required key {key!r}")
    return payload
