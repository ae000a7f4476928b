import hashlib
import os

import pytest

from xbook.launcher import (
    Action,
    BookXmlError,
    ManifestError,
    Settings,
    load_settings,
    parse_book_xml,
    parse_manifest,
    plan_update,
    save_settings,
)
from xbook.launcher.bookxml import format_book_xml
from xbook.launcher.manifest import Manifest, ManifestFile, format_manifest, scan_directory
from xbook.launcher.settings import InstanceLock, Proxy, SettingsError
from xbook.launcher.update import UpdateError, launch_book, update_book

BOOK_XML = """
<book>
  <applicationId>demofinds</applicationId>
  <applicationName>DemoFinds</applicationName>
  <description lang="en">Containers and finds</description>
  <description lang="de">Behälter und Funde</description>
  <executeFile>bin/run</executeFile>
  <updateBaseUrl>https://books.example.org/demofinds</updateBaseUrl>
</book>
"""


class FakeRemote:
    """In-memory update site: base url + files + generated manifest."""

    def __init__(self, base="https://books.example.org/demofinds", version="1.0"):
        self.base = base
        self.version = version
        self.files: dict[str, bytes] = {}
        self.tampered: dict[str, bytes] = {}
        self.fetch_log: list[str] = []

    def put(self, path, data: bytes):
        self.files[path] = data

    def manifest(self) -> Manifest:
        return Manifest(self.version, tuple(
            ManifestFile(p, hashlib.sha256(d).hexdigest(), len(d))
            for p, d in sorted(self.files.items())))

    def fetch(self, url: str) -> bytes:
        self.fetch_log.append(url)
        if not url.startswith(self.base + "/"):
            raise UpdateError(f"unreachable {url}")
        path = url[len(self.base) + 1:]
        if path == "manifest.txt":
            return format_manifest(self.manifest()).encode()
        if path in self.tampered:
            return self.tampered[path]
        if path in self.files:
            return self.files[path]
        raise UpdateError(f"404 {url}")


@pytest.fixture
def remote():
    r = FakeRemote()
    r.put("bin/run", b"#!/bin/sh\necho run\n")
    r.put("lib/core.dat", b"core-v1")
    r.put("book/demofinds.book", b"book: demofinds\n")
    return r


@pytest.fixture
def book():
    return parse_book_xml(BOOK_XML)


class TestBookXml:
    def test_minimal_document_parses(self, book):
        assert book.application_id == "demofinds"
        assert book.application_name == "DemoFinds"
        assert book.execute_file == "bin/run"
        assert book.update_base_url == "https://books.example.org/demofinds"
        assert book.descriptions == {"en": "Containers and finds",
                                     "de": "Behälter und Funde"}

    def test_missing_mandatory_element_named(self):
        broken = BOOK_XML.replace(
            "<updateBaseUrl>https://books.example.org/demofinds</updateBaseUrl>", "")
        with pytest.raises(BookXmlError, match="updateBaseUrl"):
            parse_book_xml(broken)

    def test_malformed_document(self):
        with pytest.raises(BookXmlError):
            parse_book_xml("<book><applicationId>x")

    def test_description_language_fallback(self, book):
        assert book.description("de").startswith("Beh")
        assert book.description("fr") == "Containers and finds"

    def test_bad_scheme_rejected(self):
        bad = BOOK_XML.replace("https://books.example.org/demofinds", "ftp://x")
        with pytest.raises(BookXmlError):
            parse_book_xml(bad)

    def test_traversal_execute_file_rejected(self):
        bad = BOOK_XML.replace("bin/run", "../run")
        with pytest.raises(BookXmlError):
            parse_book_xml(bad)

    def test_format_round_trip(self, book):
        assert parse_book_xml(format_book_xml(book)) == book


class TestManifest:
    def test_parse_and_format_round_trip(self, remote):
        text = format_manifest(remote.manifest())
        again = parse_manifest(text)
        assert again == remote.manifest()
        assert again.version == "1.0"

    def test_traversal_rejected(self):
        digest = "0" * 64
        with pytest.raises(ManifestError):
            parse_manifest(f"{digest} 3 ../evil\n")

    def test_absolute_rejected(self):
        with pytest.raises(ManifestError):
            parse_manifest(f"{'0' * 64} 3 /etc/passwd\n")

    def test_paths_with_spaces(self):
        digest = hashlib.sha256(b"x").hexdigest()
        m = parse_manifest(f"{digest} 1 docs/read me.txt\n")
        assert m.files[0].path == "docs/read me.txt"

    def test_duplicate_paths_rejected(self):
        digest = "0" * 64
        with pytest.raises(ManifestError):
            parse_manifest(f"{digest} 1 a\n{digest} 1 a\n")


class TestPlan:
    def test_fresh_install_downloads_everything(self, remote):
        plan = plan_update(None, remote.manifest())
        assert all(p.action is Action.DOWNLOAD for p in plan)
        assert len(plan) == 3

    def test_identical_is_all_keep(self, remote, tmp_path):
        install = tmp_path / "app"
        update_book(parse_book_xml(BOOK_XML), install, remote.fetch)
        plan = plan_update(scan_directory(install), remote.manifest())
        assert all(p.action is Action.KEEP for p in plan)

    def test_changed_and_removed(self, remote, tmp_path):
        install = tmp_path / "app"
        update_book(parse_book_xml(BOOK_XML), install, remote.fetch)
        remote.put("lib/core.dat", b"core-v2")
        del remote.files["book/demofinds.book"]
        plan = {p.path: p.action for p in plan_update(scan_directory(install),
                                                      remote.manifest())}
        assert plan["lib/core.dat"] is Action.DOWNLOAD
        assert plan["bin/run"] is Action.KEEP
        assert plan["book/demofinds.book"] is Action.DELETE

    def test_traversal_in_remote_manifest_aborts(self):
        bad = Manifest("1", (ManifestFile("../evil", "0" * 64, 1),))
        with pytest.raises(ManifestError):
            plan_update(None, bad)


class TestApplyUpdate:
    def test_fresh_install(self, remote, book, tmp_path):
        install = tmp_path / "app"
        plan = update_book(book, install, remote.fetch)
        assert sorted(p.name for p in install.rglob("*") if p.is_file()) == \
            ["core.dat", "demofinds.book", "run"]
        assert len([p for p in plan if p.action is Action.DOWNLOAD]) == 3

    def test_hash_mismatch_keeps_old_install_intact(self, remote, book, tmp_path):
        install = tmp_path / "app"
        update_book(book, install, remote.fetch)
        before = {p: p.read_bytes() for p in install.rglob("*") if p.is_file()}
        remote.put("lib/core.dat", b"core-v2")
        remote.tampered["lib/core.dat"] = b"evil payload"
        with pytest.raises(UpdateError, match="verification failed"):
            update_book(book, install, remote.fetch)
        after = {p: p.read_bytes() for p in install.rglob("*") if p.is_file()}
        assert after == before

    def test_idempotent_second_run_writes_nothing(self, remote, book, tmp_path):
        install = tmp_path / "app"
        update_book(book, install, remote.fetch)
        stamps = {p: p.stat().st_mtime_ns for p in install.rglob("*") if p.is_file()}
        plan = update_book(book, install, remote.fetch)
        assert all(p.action is Action.KEEP for p in plan)
        assert {p: p.stat().st_mtime_ns for p in install.rglob("*") if p.is_file()} == stamps

    def test_crash_at_every_boundary_leaves_old_or_new_per_path(
            self, remote, book, tmp_path):
        """Fault injection: interrupt after each download/swap/delete step;
        every file must be fully old or fully new, and a re-run completes."""
        old_manifest = None
        boundary = 0
        while True:
            install = tmp_path / f"app{boundary}"
            update_book(book, install, remote.fetch)          # install v1
            old = {f.path: f.sha256 for f in scan_directory(install).files}
            changed = FakeRemote(version="2.0")
            changed.files = dict(remote.files)
            changed.put("lib/core.dat", b"core-v2")
            changed.put("lib/extra.dat", b"brand new")
            del changed.files["book/demofinds.book"]
            new = {f.path: f.sha256 for f in changed.manifest().files}

            calls = []

            def hook(stage, path, stop_at=boundary):
                calls.append((stage, path))
                if len(calls) > stop_at:
                    raise KeyboardInterrupt("simulated crash")

            interrupted = False
            try:
                update_book(book, install, changed.fetch, fault_hook=hook)
            except KeyboardInterrupt:
                interrupted = True

            for path in set(old) | set(new):
                target = install / path
                if target.exists():
                    digest = hashlib.sha256(target.read_bytes()).hexdigest()
                    assert digest in {old.get(path), new.get(path)}, \
                        f"boundary {boundary}: {path} is neither old nor new"
                else:
                    assert path not in old or path not in new or True

            update_book(book, install, changed.fetch)          # re-run completes
            assert {f.path: f.sha256 for f in scan_directory(install).files} == new
            if not interrupted:
                break
            boundary += 1
        assert boundary >= 5  # downloads + swaps + delete all exercised
        del old_manifest

    def test_update_then_launch_runs_in_install_dir(self, remote, book, tmp_path):
        remote.put("bin/run", b"#!/bin/sh\npwd > where.txt\nprintf '%s' \"$XBOOK_PROXY\" > proxy.txt\necho \"$@\" > args.txt\n")
        install = tmp_path / "app"
        update_book(book, install, remote.fetch)
        os.chmod(install / "bin/run", 0o755)
        settings = Settings(proxy=Proxy("proxy.example.org", 3128, "u", "p"),
                            runtime_options=["--memory", "2g"])
        process = launch_book(book, install, settings, data_home=tmp_path / "home")
        assert process.wait(timeout=10) == 0
        assert (install / "where.txt").read_text().strip() == str(install.resolve())
        assert (install / "proxy.txt").read_text() == "http://u:p@proxy.example.org:3128"
        assert (install / "args.txt").read_text().split() == ["--memory", "2g"]

    def test_launch_without_execute_file(self, book, tmp_path):
        with pytest.raises(UpdateError, match="executeFile"):
            launch_book(book, tmp_path / "nope", Settings(), data_home=tmp_path)


class TestSettings:
    def test_defaults(self, tmp_path):
        s = load_settings(tmp_path / "missing.cfg")
        assert (s.language, s.sync_mode, s.proxy, s.runtime_options) == \
            ("en", "MANUAL", None, [])

    def test_round_trip(self, tmp_path):
        path = tmp_path / "settings.cfg"
        s = Settings(language="de", sync_mode="AUTO",
                     proxy=Proxy("p.example.org", 8080, "user", "pw"),
                     runtime_options=["--memory", "4g"])
        save_settings(path, s)
        assert load_settings(path) == s

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "settings.cfg"
        path.write_text("martian=yes\n")
        with pytest.raises(SettingsError):
            load_settings(path)


class TestLauncherCli:
    @pytest.fixture
    def launcher_env(self, remote, tmp_path, monkeypatch):
        from xbook.launcher import cli as launcher_cli
        monkeypatch.setattr(launcher_cli, "http_fetcher",
                            lambda **kw: self._registry_fetch(remote))
        home = tmp_path / "home"
        config = tmp_path / "config"
        monkeypatch.setenv("XBOOK_HOME", str(home))
        monkeypatch.setenv("XBOOK_CONFIG_HOME", str(config))
        return launcher_cli, home, config

    @staticmethod
    def _registry_fetch(remote):
        def fetch(url):
            if url == "https://books.example.org/demofinds/Book.xml":
                return BOOK_XML.encode()
            return remote.fetch(url)
        return fetch

    def test_add_list_update_remove(self, launcher_env, capsys):
        cli, home, config = launcher_env
        assert cli.main(["add", "https://books.example.org/demofinds/Book.xml"]) == 0
        assert cli.main(["list"]) == 0
        out = capsys.readouterr().out
        assert "demofinds" in out and "not installed" in out
        assert cli.main(["update", "demofinds"]) == 0
        assert (home / "apps" / "demofinds" / "bin" / "run").exists()
        assert cli.main(["remove", "demofinds"]) == 0
        # registry isolation: removing the registry entry keeps the files
        assert (home / "apps" / "demofinds" / "bin" / "run").exists()

    def test_registry_isolation_between_books(self, remote, tmp_path, monkeypatch):
        """Two Books from different hosts coexist; dropping one from the
        registry never touches the other Book's files."""
        from xbook.launcher import cli as launcher_cli

        other = FakeRemote(base="https://other.example.net/fieldnotes")
        other.put("bin/run", b"#!/bin/sh\necho other\n")
        other_xml = (BOOK_XML
                     .replace("demofinds", "fieldnotes")
                     .replace("DemoFinds", "FieldNotes")
                     .replace("https://books.example.org/fieldnotes",
                              "https://other.example.net/fieldnotes"))

        def fetch(url):
            if url == "https://books.example.org/demofinds/Book.xml":
                return BOOK_XML.encode()
            if url == "https://other.example.net/fieldnotes/Book.xml":
                return other_xml.encode()
            if url.startswith(other.base):
                return other.fetch(url)
            return remote.fetch(url)

        monkeypatch.setattr(launcher_cli, "http_fetcher", lambda **kw: fetch)
        home = tmp_path / "home"
        monkeypatch.setenv("XBOOK_HOME", str(home))
        monkeypatch.setenv("XBOOK_CONFIG_HOME", str(tmp_path / "config"))

        cli = launcher_cli
        assert cli.main(["add", "https://books.example.org/demofinds/Book.xml"]) == 0
        assert cli.main(["add", "https://other.example.net/fieldnotes/Book.xml"]) == 0
        assert cli.main(["update"]) == 0  # both install
        demo_files = sorted((home / "apps" / "demofinds").rglob("*"))
        state = {p: p.read_bytes() for p in demo_files if p.is_file()}
        assert cli.main(["remove", "fieldnotes"]) == 0
        assert {p: p.read_bytes()
                for p in (home / "apps" / "demofinds").rglob("*") if p.is_file()} == state

    def test_re_add_replaces_record(self, launcher_env):
        cli, home, config = launcher_env
        cli.main(["add", "https://books.example.org/demofinds/Book.xml"])
        cli.main(["add", "https://books.example.org/demofinds/Book.xml"])
        from xbook.launcher.settings import load_registry
        registry = load_registry(config / "launcher" / "registry.json")
        assert list(registry) == ["demofinds"]

    def test_bad_url_leaves_registry_unchanged(self, launcher_env, capsys):
        cli, home, config = launcher_env
        cli.main(["add", "https://books.example.org/demofinds/Book.xml"])
        assert cli.main(["add", "https://unreachable.example.org/Book.xml"]) == 1
        from xbook.launcher.settings import load_registry
        registry = load_registry(config / "launcher" / "registry.json")
        assert list(registry) == ["demofinds"]

    def test_settings_persist(self, launcher_env, capsys):
        cli, home, config = launcher_env
        assert cli.main(["settings", "--set", "language=de",
                         "--set", "sync_mode=AUTO"]) == 0
        assert cli.main(["settings"]) == 0
        out = capsys.readouterr().out
        assert "language=de" in out and "sync_mode=AUTO" in out

    def test_instance_lock_blocks_second_holder(self, tmp_path):
        lock_path = tmp_path / "launcher.lock"
        with InstanceLock(lock_path):
            other = InstanceLock(lock_path)
            with pytest.raises(SettingsError):
                other.acquire()
        InstanceLock(lock_path).acquire()  # released, works again
