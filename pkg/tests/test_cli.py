"""Whole-flow tests of both command lines against a real HTTP server."""

import json

import pytest

from xbook.client import cli as client_cli
from xbook.server import WireApi
from xbook.server import cli as server_cli
from xbook.server.http import serve
from conftest import make_server


@pytest.fixture
def live_server(tmp_path, clock, demo_book):
    server = make_server(tmp_path, clock, name="cli-server.db")
    server.init_from_book(demo_book)
    handle = serve(WireApi(server), "127.0.0.1", 0)
    yield server, handle
    handle.stop()
    server.storage.close()


@pytest.fixture
def home(tmp_path, monkeypatch):
    home = tmp_path / "home"
    config = tmp_path / "config"
    monkeypatch.setenv("XBOOK_HOME", str(home))
    monkeypatch.setenv("XBOOK_CONFIG_HOME", str(config))
    return home


def run(argv):
    return client_cli.main(argv)


class TestClientCli:
    def test_full_flow(self, live_server, home, tmp_path, capsys):
        server, handle = live_server
        url = handle.address
        assert run(["register", "--server", url, "--insecure",
                    "--username", "ada", "--password", "s3cretpw!",
                    "--email", "ada@x.org"]) == 0
        assert run(["login", "--server", url, "--insecure",
                    "--username", "ada", "--password", "s3cretpw!"]) == 0

        assert run(["create-project", "dig"]) == 0
        token = server.login("ada", "s3cretpw!")[0]
        (listed,) = server.list_projects(token)
        project = listed[0]
        assert run(["projects"]) == 0
        out = capsys.readouterr().out
        assert "dig" in out

        payload = tmp_path / "entry.json"
        payload.write_text(json.dumps({
            "values": {"label": {"kind": "text", "value": "Box A"}}}))
        ref = f"{project.key.id}:{project.key.dbid}"
        assert run(["save", "--mask", "Container", "--json", str(payload),
                    "--project", ref]) == 0
        assert run(["sync", "--project", ref]) == 0
        out = capsys.readouterr().out
        assert "pushed=1" in out

        outdir = tmp_path / "exports"
        outdir.mkdir()
        assert run(["export", "--project", ref, "--out", str(outdir)]) == 0
        files = sorted(p.name for p in outdir.glob("*.csv"))
        assert files == ["dig_Container.csv", "dig_Find.csv"]

        assert run(["conflicts"]) == 0
        assert "no conflicts" in capsys.readouterr().out

    def test_invalid_save_reports_states(self, live_server, home, tmp_path, capsys):
        server, handle = live_server
        run(["register", "--server", handle.address, "--insecure",
             "--username", "bob", "--password", "s3cretpw!", "--email", "bob@x.org"])
        run(["login", "--server", handle.address, "--insecure",
             "--username", "bob", "--password", "s3cretpw!"])
        token = server.login("bob", "s3cretpw!")[0]
        project = server.create_project(token, "p2")
        run(["projects"])
        capsys.readouterr()
        payload = tmp_path / "bad.json"
        payload.write_text(json.dumps({
            "values": {"count": {"kind": "number", "value": 20000}}}))
        ref = f"{project.key.id}:{project.key.dbid}"
        assert run(["save", "--mask", "Find", "--json", str(payload),
                    "--project", ref]) == 1
        err = capsys.readouterr().err
        assert "count: invalid" in err
        assert "container: mandatory_missing" in err

    def test_not_logged_in_is_a_clean_error(self, home, capsys):
        assert run(["sync"]) == 1
        assert "not logged in" in capsys.readouterr().err

    def test_auto_sync_after_save(self, live_server, home, tmp_path, capsys,
                                  monkeypatch):
        """With the launcher set to automatic synchronization, a successful
        save triggers a sync when the server is reachable."""
        server, handle = live_server
        from xbook.launcher.settings import Settings, save_settings
        from xbook import paths
        import os
        save_settings(paths.config_home(dict(os.environ)) / "launcher" / "settings.cfg",
                      Settings(sync_mode="AUTO"))
        run(["register", "--server", handle.address, "--insecure",
             "--username", "cle", "--password", "s3cretpw!", "--email", "cle@x.org"])
        run(["login", "--server", handle.address, "--insecure",
             "--username", "cle", "--password", "s3cretpw!"])
        token = server.login("cle", "s3cretpw!")[0]
        project = server.create_project(token, "auto")
        run(["projects"])
        capsys.readouterr()
        payload = tmp_path / "entry.json"
        payload.write_text(json.dumps({
            "values": {"label": {"kind": "text", "value": "Box"}}}))
        assert run(["save", "--mask", "Container", "--json", str(payload),
                    "--project", f"{project.key.id}:{project.key.dbid}"]) == 0
        out = capsys.readouterr().out
        assert "auto-sync: pushed=1" in out
        entries, _ = server.pull(token, project.key, 0)
        assert len(entries) == 1


class TestServerCli:
    def test_init_set_version_add_migration(self, tmp_path, capsys):
        config = tmp_path / "server.cfg"
        storage = tmp_path / "srv.db"
        config.write_text(f"storage={storage}\nbind=127.0.0.1:0\n")
        from importlib import resources
        book_path = tmp_path / "demo.book"
        book_path.write_text(resources.files("xbook").joinpath(
            "books/demofinds.book").read_text("utf-8"))

        assert server_cli.main(["--config", str(config), "init",
                                "--book", str(book_path)]) == 0
        out = capsys.readouterr().out
        assert "schema version 4" in out

        migration = tmp_path / "m4.book"
        migration.write_text("migration: from=4\n"
                             "stmt: add_column table=Find column=weight kind=decimal\n")
        assert server_cli.main(["--config", str(config), "add-migration",
                                str(migration)]) == 0
        assert server_cli.main(["--config", str(config),
                                "set-required-version", "5"]) == 0

        from xbook.server import ServerStorage, SyncServer
        server = SyncServer(ServerStorage(str(storage)), scrypt_cost=2**4)
        assert server.required_version() == 5
        server.register("x", "X", "X", "x@x.org", "s3cretpw!")
        token = server.login("x", "s3cretpw!")[0]
        (m,) = server.migrations_from(token, 4)
        assert m.statements[0].params["column"] == "weight"

    def test_public_bind_refused_without_flag(self, tmp_path, capsys):
        config = tmp_path / "server.cfg"
        config.write_text(f"storage={tmp_path / 's.db'}\nbind=0.0.0.0:18099\n")
        assert server_cli.main(["--config", str(config), "serve"]) == 2
        assert "TLS" in capsys.readouterr().err
