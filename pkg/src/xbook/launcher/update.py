"""Update planning, staged application, and Book launch.

Planning diffs the files on disk against the remote manifest. Application
is stage-then-swap: every download lands in a staging directory and is
verified against the manifest hash BEFORE anything moves; the swap then
replaces files one by one atomically. An interruption at any point leaves
every path either fully old or fully new, and re-running completes the
update. A failed verification aborts with the previous install intact.
"""

from __future__ import annotations

import enum
import hashlib
import logging
import os
import shutil
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Callable
from urllib.parse import urlsplit

from .bookxml import BookXml
from .manifest import Manifest, ManifestError, check_path, parse_manifest, scan_directory
from .settings import Settings

log = logging.getLogger("xbook.launcher")

# test seam: called between observable update steps, may raise to simulate
# a crash at that boundary
FaultHook = Callable[[str, str], None]

# fetch(url) -> bytes
Fetcher = Callable[[str], bytes]


class UpdateError(Exception):
    pass


class Action(enum.Enum):
    DOWNLOAD = "download"
    DELETE = "delete"
    KEEP = "keep"


@dataclass(frozen=True)
class PlanItem:
    path: str
    action: Action


def http_fetcher(allow_insecure: bool = False, timeout_s: float = 60.0,
                 proxy_url: str | None = None) -> Fetcher:
    """Plain HTTP(S) fetcher, restricted to https on ports 443/80 unless
    insecure fetches are explicitly allowed."""
    import requests

    session = requests.Session()
    session.trust_env = False
    if proxy_url:
        session.proxies = {"http": proxy_url, "https": proxy_url}

    def fetch(url: str) -> bytes:
        parts = urlsplit(url)
        if parts.scheme not in ("http", "https"):
            raise UpdateError(f"unsupported scheme in {url!r}")
        if not allow_insecure:
            if parts.scheme != "https":
                raise UpdateError(f"plain http fetch needs --insecure: {url}")
            if parts.port not in (None, 443, 80):
                raise UpdateError(f"non-standard port needs --insecure: {url}")
        try:
            response = session.get(url, timeout=timeout_s)
        except requests.RequestException as e:
            raise UpdateError(f"fetch failed: {e}") from e
        if response.status_code != 200:
            raise UpdateError(f"fetch of {url} answered HTTP {response.status_code}")
        return response.content

    return fetch


def fetch_remote_manifest(book: BookXml, fetch: Fetcher) -> Manifest:
    try:
        return parse_manifest(fetch(book.update_base_url + "/manifest.txt").decode("utf-8"))
    except (ManifestError, UnicodeDecodeError) as e:
        raise UpdateError(f"bad remote manifest: {e}") from e


def plan_update(installed: Manifest | None, remote: Manifest) -> list[PlanItem]:
    """DOWNLOAD what is new or changed, DELETE what only exists locally,
    KEEP what is identical. A fresh install downloads everything."""
    for f in remote.files:
        check_path(f.path)
    have = installed.by_path() if installed is not None else {}
    plan = []
    for f in remote.files:
        if f.path not in have:
            plan.append(PlanItem(f.path, Action.DOWNLOAD))
        elif have[f.path].sha256 != f.sha256:
            plan.append(PlanItem(f.path, Action.DOWNLOAD))
        else:
            plan.append(PlanItem(f.path, Action.KEEP))
    remote_paths = {f.path for f in remote.files}
    for path in sorted(have):
        if path not in remote_paths:
            plan.append(PlanItem(path, Action.DELETE))
    return plan


def _no_fault(stage: str, path: str) -> None:
    pass


def apply_update(install_dir: str | Path, plan: list[PlanItem], remote: Manifest,
                 fetch: Fetcher, base_url: str,
                 fault_hook: FaultHook | None = None) -> int:
    """Execute a plan; returns the number of files written or removed.

    Downloads are verified (hash and size) in staging before the first
    byte of the existing install moves; the swap uses one atomic replace
    per file.
    """
    fault = fault_hook or _no_fault
    install_dir = Path(install_dir)
    staging = install_dir.parent / f".{install_dir.name}.staging"
    if staging.exists():
        shutil.rmtree(staging)  # leftover from an interrupted run
    remote_files = remote.by_path()
    downloads = [item.path for item in plan if item.action is Action.DOWNLOAD]
    deletes = [item.path for item in plan if item.action is Action.DELETE]

    try:
        for path in downloads:
            data = fetch(base_url.rstrip("/") + "/" + path)
            expect = remote_files[path]
            digest = hashlib.sha256(data).hexdigest()
            if digest != expect.sha256 or len(data) != expect.size:
                raise UpdateError(
                    f"verification failed for {path!r}: got {digest}/{len(data)} bytes, "
                    f"manifest says {expect.sha256}/{expect.size}")
            target = staging / path
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(data)
            fault("downloaded", path)

        install_dir.mkdir(parents=True, exist_ok=True)
        for path in downloads:
            final = install_dir / path
            final.parent.mkdir(parents=True, exist_ok=True)
            os.replace(staging / path, final)
            fault("swapped", path)
        for path in deletes:
            (install_dir / path).unlink(missing_ok=True)
            fault("deleted", path)
    finally:
        if staging.exists():
            shutil.rmtree(staging, ignore_errors=True)
    return len(downloads) + len(deletes)


def update_book(book: BookXml, install_dir: str | Path, fetch: Fetcher,
                fault_hook: FaultHook | None = None) -> list[PlanItem]:
    """Plan against the files on disk and apply; returns the plan."""
    remote = fetch_remote_manifest(book, fetch)
    installed = scan_directory(Path(install_dir))
    plan = plan_update(installed, remote)
    apply_update(install_dir, plan, remote, fetch, book.update_base_url,
                 fault_hook=fault_hook)
    return plan


def launch_book(book: BookXml, install_dir: str | Path, settings: Settings,
                data_home: str | Path, extra_env: dict[str, str] | None = None,
                argv_prefix: list[str] | None = None) -> subprocess.Popen:
    """Run the Book's executeFile in its install directory.

    Runtime options become arguments; language, data home, and proxy
    settings travel in the environment (XBOOK_* plus the conventional
    proxy variables).
    """
    install_dir = Path(install_dir)
    execute = install_dir / book.execute_file
    if not execute.is_file():
        raise UpdateError(f"executeFile {book.execute_file!r} is missing; update first")
    env = dict(os.environ)
    env["XBOOK_HOME"] = str(data_home)
    env["XBOOK_LANGUAGE"] = settings.language
    env["XBOOK_SYNC_MODE"] = settings.sync_mode
    if settings.proxy is not None:
        proxy_url = settings.proxy.url()
        env["XBOOK_PROXY"] = proxy_url
        env["HTTP_PROXY"] = env["http_proxy"] = proxy_url
        env["HTTPS_PROXY"] = env["https_proxy"] = proxy_url
    if extra_env:
        env.update(extra_env)
    argv = list(argv_prefix or []) + [str(execute)] + list(settings.runtime_options)
    log.info("launching %s: %s", book.application_id, argv)
    return subprocess.Popen(argv, cwd=str(install_dir), env=env)
