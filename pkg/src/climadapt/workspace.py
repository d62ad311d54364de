"""Content-addressed artifact store with a JSON manifest.

Every artifact is a file or a directory under ``artifacts/<id>/``; its id is
``<kind>-<first 12 hex digits of its sha256>``, so registering identical
content twice yields the same id and leaves the manifest unchanged. Writers
hold a lock file while they touch the manifest; readers do not.
"""

from __future__ import annotations

import hashlib
import json
import os
import shutil
import tempfile
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path

from filelock import FileLock

from .errors import ConfigError, LookupFailure, ValidationError

MANIFEST = "manifest.json"
MANIFEST_VERSION = 1


def sha256_path(path: Path) -> str:
    """Digest of a file, or of a directory's sorted (relative name, file digest) list."""
    path = Path(path)
    if path.is_file():
        h = hashlib.sha256()
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                h.update(chunk)
        return h.hexdigest()
    h = hashlib.sha256()
    for sub in sorted(p for p in path.rglob("*") if p.is_file()):
        h.update(sub.relative_to(path).as_posix().encode())
        h.update(b"\0")
        h.update(sha256_path(sub).encode())
        h.update(b"\n")
    return h.hexdigest()


class Workspace:
    """A directory holding ``manifest.json``, ``artifacts/`` and a lock file."""

    def __init__(self, root):
        self.root = Path(root)
        self.manifest_path = self.root / MANIFEST
        if not self.manifest_path.is_file():
            raise ConfigError(f"workspace {self.root} is not initialized (run 'init')")
        self._lock = FileLock(str(self.root / ".lock"))

    @classmethod
    def init(cls, root) -> "Workspace":
        root = Path(root)
        root.mkdir(parents=True, exist_ok=True)
        (root / "artifacts").mkdir(exist_ok=True)
        manifest = root / MANIFEST
        if not manifest.exists():
            with FileLock(str(root / ".lock")):
                _write_json(manifest, {"version": MANIFEST_VERSION, "artifacts": {}})
        return cls(root)

    # -- reading ------------------------------------------------------------

    def manifest(self) -> dict:
        data = json.loads(self.manifest_path.read_text(encoding="utf-8"))
        if data.get("version") != MANIFEST_VERSION:
            raise ValidationError(f"{self.manifest_path}: unsupported manifest version")
        return data

    def entry(self, artifact_id: str) -> dict:
        entries = self.manifest()["artifacts"]
        if artifact_id not in entries:
            raise LookupFailure(f"no artifact {artifact_id!r} in workspace {self.root}")
        return entries[artifact_id]

    def path(self, artifact_id: str, kind: str | None = None) -> Path:
        entry = self.entry(artifact_id)
        if kind is not None and entry["kind"] != kind:
            raise ValidationError(f"artifact {artifact_id!r} is a {entry['kind']}, not a {kind}")
        return self.root / entry["path"]

    def ids(self, kind: str | None = None) -> list:
        """Artifact ids in registration order, optionally filtered by kind."""
        entries = self.manifest()["artifacts"]
        return [k for k, v in entries.items() if kind is None or v["kind"] == kind]

    def verify(self) -> list:
        """Problems found: missing files or hash mismatches (empty when healthy)."""
        problems = []
        for aid, entry in self.manifest()["artifacts"].items():
            target = self.root / entry["path"]
            if not target.exists():
                problems.append(f"{aid}: missing {entry['path']}")
            elif sha256_path(target) != entry["sha256"]:
                problems.append(f"{aid}: hash mismatch")
        return problems

    # -- writing ------------------------------------------------------------

    @contextmanager
    def staging(self):
        """Temporary directory inside the workspace for building new artifacts."""
        stage_root = self.root / ".staging"
        stage_root.mkdir(exist_ok=True)
        tmp = Path(tempfile.mkdtemp(dir=stage_root))
        try:
            yield tmp
        finally:
            shutil.rmtree(tmp, ignore_errors=True)

    def register(self, kind: str, source, meta: dict | None = None) -> str:
        """Move ``source`` (file or directory) into the store and record it.

        Returns the content-derived id. If the id is already registered the
        stored copy and its creation time are kept and ``source`` is dropped.
        """
        source = Path(source)
        digest = sha256_path(source)
        artifact_id = f"{kind}-{digest[:12]}"
        rel = Path("artifacts") / artifact_id / source.name
        with self._lock:
            data = self.manifest()
            entries = data["artifacts"]
            if artifact_id in entries:
                return artifact_id
            target = self.root / rel
            if target.exists():
                shutil.rmtree(target) if target.is_dir() else target.unlink()
            target.parent.mkdir(parents=True, exist_ok=True)
            shutil.move(str(source), str(target))
            entries[artifact_id] = {
                "kind": kind,
                "path": rel.as_posix(),
                "sha256": digest,
                "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
                "meta": meta or {},
            }
            _write_json(self.manifest_path, data)
        return artifact_id


def _write_json(path: Path, data) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".manifest-")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(data, indent=1) + "\n")
    os.replace(tmp, path)
