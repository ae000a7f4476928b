"""Launcher settings and the Book registry.

Settings persist as a key=value file in the per-user config directory:
UI language, automatic vs manual synchronization, optional proxy, and
extra runtime options handed to launched Books (e.g. a bigger memory
allotment). The registry records every added Book, one JSON object per
applicationId; each Book's files stay under its own install directory,
so registry changes never touch another Book's files.
"""

from __future__ import annotations

import fcntl
import json
import shlex
from dataclasses import dataclass, field
from pathlib import Path

from .bookxml import BookXml


class SettingsError(Exception):
    pass


@dataclass
class Proxy:
    host: str
    port: int
    username: str | None = None
    password: str | None = None

    def url(self) -> str:
        auth = ""
        if self.username:
            auth = self.username
            if self.password:
                auth += f":{self.password}"
            auth += "@"
        return f"http://{auth}{self.host}:{self.port}"


@dataclass
class Settings:
    language: str = "en"
    sync_mode: str = "MANUAL"          # MANUAL | AUTO
    proxy: Proxy | None = None
    runtime_options: list[str] = field(default_factory=list)


def load_settings(path: str | Path) -> Settings:
    settings = Settings()
    try:
        text = Path(path).read_text("utf-8")
    except FileNotFoundError:
        return settings
    proxy: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise SettingsError(f"line {lineno}: expected key=value")
        key, value = key.strip(), value.strip()
        if key == "language":
            settings.language = value
        elif key == "sync_mode":
            if value not in ("MANUAL", "AUTO"):
                raise SettingsError(f"line {lineno}: sync_mode must be MANUAL or AUTO")
            settings.sync_mode = value
        elif key in ("proxy_host", "proxy_port", "proxy_username", "proxy_password"):
            proxy[key.removeprefix("proxy_")] = value
        elif key == "runtime_options":
            settings.runtime_options = shlex.split(value)
        else:
            raise SettingsError(f"line {lineno}: unknown key {key!r}")
    if proxy.get("host"):
        try:
            port = int(proxy.get("port", "8080"))
        except ValueError as e:
            raise SettingsError(f"bad proxy_port {proxy.get('port')!r}") from e
        settings.proxy = Proxy(proxy["host"], port,
                               proxy.get("username") or None,
                               proxy.get("password") or None)
    return settings


def save_settings(path: str | Path, settings: Settings) -> None:
    lines = [f"language={settings.language}", f"sync_mode={settings.sync_mode}"]
    if settings.proxy is not None:
        lines.append(f"proxy_host={settings.proxy.host}")
        lines.append(f"proxy_port={settings.proxy.port}")
        if settings.proxy.username:
            lines.append(f"proxy_username={settings.proxy.username}")
        if settings.proxy.password:
            lines.append(f"proxy_password={settings.proxy.password}")
    if settings.runtime_options:
        lines.append("runtime_options=" + shlex.join(settings.runtime_options))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", "utf-8")


# -- registry -----------------------------------------------------------------


def load_registry(path: str | Path) -> dict[str, dict]:
    try:
        data = json.loads(Path(path).read_text("utf-8"))
    except FileNotFoundError:
        return {}
    return {entry["applicationId"]: entry for entry in data}


def save_registry(path: str | Path, registry: dict[str, dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(sorted(registry.values(),
                                      key=lambda e: e["applicationId"]), indent=2), "utf-8")


def registry_record(book: BookXml, source_url: str) -> dict:
    return {
        "applicationId": book.application_id,
        "applicationName": book.application_name,
        "descriptions": book.descriptions,
        "executeFile": book.execute_file,
        "updateBaseUrl": book.update_base_url,
        "iconFile": book.icon_file,
        "sourceUrl": source_url,
    }


def book_from_record(record: dict) -> BookXml:
    return BookXml(
        application_id=record["applicationId"],
        application_name=record["applicationName"],
        execute_file=record["executeFile"],
        update_base_url=record["updateBaseUrl"],
        descriptions=dict(record.get("descriptions") or {}),
        icon_file=record.get("iconFile"),
    )


class InstanceLock:
    """Single launcher instance per user, via an exclusive file lock."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._fh = None

    def acquire(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w")
        try:
            fcntl.flock(self._fh, fcntl.LOCK_EX | fcntl.LOCK_NB)
        except OSError as e:
            self._fh.close()
            self._fh = None
            raise SettingsError("another launcher instance is already running") from e

    def release(self) -> None:
        if self._fh is not None:
            fcntl.flock(self._fh, fcntl.LOCK_UN)
            self._fh.close()
            self._fh = None

    def __enter__(self) -> "InstanceLock":
        self.acquire()
        return self

    def __exit__(self, *exc) -> None:
        self.release()
