"""The file manifest installs are diffed against.

Text format, one file per line plus a version header:

    version 1.4.2
    <sha256 hex> <size bytes> <relative path>

Paths may contain spaces (everything after the second field). Parent
directory traversal is rejected outright: a hostile manifest must never
be able to write outside the install directory.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from pathlib import Path


class ManifestError(Exception):
    pass


@dataclass(frozen=True)
class ManifestFile:
    path: str
    sha256: str
    size: int


@dataclass
class Manifest:
    version: str
    files: tuple[ManifestFile, ...]

    def by_path(self) -> dict[str, ManifestFile]:
        return {f.path: f for f in self.files}


_HASH_RE = re.compile(r"[0-9a-f]{64}")


def check_path(path: str) -> str:
    if not path or path.startswith(("/", "\\")) or "\\" in path:
        raise ManifestError(f"manifest path must be relative with / separators: {path!r}")
    if ".." in path.split("/"):
        raise ManifestError(f"manifest path may not traverse upwards: {path!r}")
    return path


def parse_manifest(text: str) -> Manifest:
    version = ""
    files: list[ManifestFile] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("version "):
            version = line[len("version "):].strip()
            continue
        parts = line.split(" ", 2)
        if len(parts) != 3:
            raise ManifestError(f"line {lineno}: expected '<hash> <size> <path>'")
        digest, size_text, path = parts
        if _HASH_RE.fullmatch(digest) is None:
            raise ManifestError(f"line {lineno}: bad sha256 {digest!r}")
        try:
            size = int(size_text)
        except ValueError as e:
            raise ManifestError(f"line {lineno}: bad size {size_text!r}") from e
        check_path(path)
        if path in seen:
            raise ManifestError(f"line {lineno}: duplicate path {path!r}")
        seen.add(path)
        files.append(ManifestFile(path, digest, size))
    return Manifest(version, tuple(files))


def format_manifest(manifest: Manifest) -> str:
    lines = [f"version {manifest.version}"]
    lines += [f"{f.sha256} {f.size} {f.path}" for f in manifest.files]
    return "\n".join(lines) + "\n"


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def scan_directory(directory: Path, version: str = "") -> Manifest:
    """Manifest of what is actually on disk. Update planning diffs against
    this, so an interrupted update heals on the next run."""
    files = []
    if directory.is_dir():
        for path in sorted(directory.rglob("*")):
            if path.is_file():
                rel = path.relative_to(directory).as_posix()
                files.append(ManifestFile(rel, sha256_file(path), path.stat().st_size))
    return Manifest(version, tuple(files))


def build_manifest(directory: Path, version: str) -> Manifest:
    """Manifest for publishing a directory (tooling helper)."""
    return scan_directory(directory, version)
