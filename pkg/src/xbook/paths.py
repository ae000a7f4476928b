"""Per-user directories.

XBOOK_HOME overrides the data directory; the config directory holds the
launcher registry, settings, and install markers. Defaults follow the
platform's per-user application-data conventions, where writing
permissions are guaranteed.
"""

from __future__ import annotations

import os
import sys
from pathlib import Path


def data_home(env: dict[str, str] | None = None) -> Path:
    env = os.environ if env is None else env
    override = env.get("XBOOK_HOME")
    if override:
        return Path(override)
    if sys.platform == "win32":
        base = env.get("APPDATA", str(Path.home() / "AppData" / "Roaming"))
        return Path(base) / "xbook"
    if sys.platform == "darwin":
        return Path.home() / "Library" / "Application Support" / "xbook"
    base = env.get("XDG_DATA_HOME", str(Path.home() / ".local" / "share"))
    return Path(base) / "xbook"


def config_home(env: dict[str, str] | None = None) -> Path:
    env = os.environ if env is None else env
    override = env.get("XBOOK_CONFIG_HOME")
    if override:
        return Path(override)
    if sys.platform == "win32":
        base = env.get("APPDATA", str(Path.home() / "AppData" / "Roaming"))
        return Path(base) / "xbook"
    if sys.platform == "darwin":
        return Path.home() / "Library" / "Preferences" / "xbook"
    base = env.get("XDG_CONFIG_HOME", str(Path.home() / ".config"))
    return Path(base) / "xbook"
