"""Run manifests: enough provenance to audit and reproduce any output.

A manifest records the tool version, the subcommand and its arguments, the
seed, the template hash when templates were involved, and a content hash per
input file. It deliberately contains no timestamps or host details, so a
rerun with identical inputs writes byte-identical manifests.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from . import __version__

MANIFEST_SUFFIX = ".manifest.json"


def file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def build_manifest(
    subcommand: str,
    args: dict,
    inputs: dict[str, str | Path] | None = None,
    seed: int | None = None,
    template_sha256: str | None = None,
) -> dict:
    return {
        "tool": "crashkit",
        "version": __version__,
        "subcommand": subcommand,
        "seed": seed,
        "template_sha256": template_sha256,
        "args": {key: _plain(value) for key, value in sorted(args.items())},
        "inputs": {
            name: {"path": str(path), "sha256": file_sha256(path)}
            for name, path in sorted((inputs or {}).items())
        },
    }


def _plain(value):
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def manifest_path_for(output: str | Path) -> Path:
    return Path(str(output) + MANIFEST_SUFFIX)


def write_manifest(output: str | Path, manifest: dict) -> Path:
    """Write the sidecar manifest for an output file and return its path."""
    path = manifest_path_for(output)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
