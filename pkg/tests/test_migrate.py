import pytest

from xbook import book as bookmod
from xbook import model
from xbook.client import LocalStore, MigrationError, VersionAhead
from xbook.client.migrate import apply_migrations, apply_one
from xbook.model import GlobalKey, Text
from conftest import make_client


@pytest.fixture
def v1_book():
    return bookmod.reference_book_v1()


@pytest.fixture
def env(tmp_path, server, v1_book, clock):
    """A client whose store still has the version-1 layout."""
    return make_client(tmp_path, server, v1_book, "old", clock)


def fresh_v4_hash(tmp_path, demo_book, clock):
    store = LocalStore.create(tmp_path / "fresh4.db", demo_book, clock=clock)
    h = store.schema_hash()
    store.close()
    return h


class TestRunner:
    def test_noop_when_current(self, tmp_path, server, demo_book, clock):
        env = make_client(tmp_path, server, demo_book, "cur", clock)
        assert apply_migrations(env.store, env.session) == 4
        assert env.store.schema_version == 4

    def test_migrates_one_to_four(self, env):
        assert env.store.schema_version == 1
        assert apply_migrations(env.store, env.session) == 4
        assert env.store.schema_version == 4

    def test_migrated_schema_equals_fresh_install(self, env, tmp_path, demo_book, clock):
        apply_migrations(env.store, env.session)
        assert env.store.schema_hash() == fresh_v4_hash(tmp_path, demo_book, clock)

    def test_recursive_from_every_start_version(self, tmp_path, server, demo_book,
                                                v1_book, clock):
        """Chains starting at 1, 2, and 3 all converge on the same schema."""
        target = fresh_v4_hash(tmp_path, demo_book, clock)
        env = make_client(tmp_path, server, v1_book, "chain", clock)
        for stop in (2, 3):
            partial = make_client(tmp_path, server, v1_book, f"part{stop}", clock)
            while partial.store.schema_version < stop:
                batch = partial.session.migrations_from(partial.store.schema_version)
                apply_one(partial.store, batch[0])
            assert apply_migrations(partial.store, partial.session) == 4
            assert partial.store.schema_hash() == target
        assert apply_migrations(env.store, env.session) == 4
        assert env.store.schema_hash() == target

    def test_version_ahead_refused(self, tmp_path, server, demo_book, clock):
        env = make_client(tmp_path, server, demo_book, "ahead", clock)
        server.set_required_version(3)
        with pytest.raises(VersionAhead):
            apply_migrations(env.store, env.session)

    def test_data_survives_and_transforms(self, env, server, clock, tmp_path):
        project = env.session.create_project("dig").key
        container = env.store.save_entry("Container", project, {"label": Text("Box A")})
        # create v2-era rows by applying the first migration, then writing raw
        batch = env.session.migrations_from(1)
        apply_one(env.store, batch[0])
        find = model.Entry(
            key=GlobalKey(500, env.dbid), mask="Find", project=project,
            values={"species": model.Code("species", 2),
                    "count": model.Text("17"),
                    "legacy_note": model.Text("from the old days")},
            version=0, status=model.SyncStatus.CHANGED_LOCALLY,
            modified_ms=0, deleted=False)
        env.store.put_row(find)
        assert apply_migrations(env.store, env.session) == 4
        migrated = env.store.get_entry(find.key)
        assert migrated.values["count"] == model.Number(17)       # text_to_int
        assert migrated.values["note"] == model.Text("from the old days")
        assert "legacy_note" not in migrated.values               # column dropped
        assert env.store.get_entry(container.key).values["label"] == Text("Box A")

    def test_failing_statement_rolls_back_to_version_boundary(self, env):
        batch = env.session.migrations_from(1)
        apply_one(env.store, batch[0])  # now at 2
        bad = model.Migration(2, (
            model.Statement("add_column", {"table": "Find", "column": "ok", "kind": "text"}),
            model.Statement("transform_column", {"table": "Find", "column": "count",
                                                 "kind": "number", "transform": "martian"}),
        ))
        with pytest.raises(MigrationError):
            apply_one(env.store, bad)
        assert env.store.schema_version == 2
        assert ("Find", "ok", "text") not in env.store.schema_descriptor()

    def test_unconvertible_value_aborts_with_version_report(self, env):
        batch = env.session.migrations_from(1)
        apply_one(env.store, batch[0])
        project = GlobalKey(1, 1)
        env.store.put_row(model.Entry(
            key=GlobalKey(600, env.dbid), mask="Find", project=project,
            values={"count": model.Text("many")}, version=0,
            status=model.SyncStatus.CHANGED_LOCALLY, modified_ms=0, deleted=False))
        apply_one(env.store, env.session.migrations_from(2)[0])
        with pytest.raises(MigrationError) as e:
            apply_one(env.store, env.session.migrations_from(3)[0])
        assert e.value.at_version == 3
        assert env.store.schema_version == 3

    def test_gap_in_chain_reported(self, env, server):
        server.set_required_version(9)
        with pytest.raises(MigrationError):
            apply_migrations(env.store, env.session)
        # everything available was applied before the gap was hit
        assert env.store.schema_version == 4


def v3_book(demo_book):
    """The version-3 layout: finds exist but count is still free text and
    the legacy note column is still around."""
    find = bookmod.MaskDef("Find", (
        bookmod.FieldDef("species", "code", table="species", mandatory=True),
        bookmod.FieldDef("count", "text"),
        bookmod.FieldDef("legacy_note", "text"),
        bookmod.FieldDef("container", "crosslink", target="Container"),
        bookmod.FieldDef("note", "text"),
        bookmod.FieldDef("recordedAt", "timestamp"),
    ))
    return bookmod.BookDescriptor(
        demo_book.book_id, demo_book.book_name, 3,
        (demo_book.masks[0], find), demo_book.code_tables, demo_book.migrations)


class TestServerUpgrade:
    def test_server_rows_follow_the_schema(self, tmp_path, clock, demo_book):
        """A Book upgrade on the server rewrites stored rows, so clients at
        the new version pull correctly typed values."""
        from conftest import make_client, make_server
        from xbook.client.sync import refresh_projects, sync_project

        server = make_server(tmp_path, clock)
        server.init_from_book(v3_book(demo_book))
        assert server.required_version() == 3

        old = make_client(tmp_path, server, v3_book(demo_book), "old", clock)
        project = old.session.create_project("dig").key
        refresh_projects(old.store, old.session)
        box = old.store.save_entry("Container", project, {"label": Text("Box")})
        old.store.save_entry("Find", project, {
            "species": model.Code("species", 2),
            "count": Text("17"),
            "legacy_note": Text("keep me"),
            "container": model.CrossLink("Container", box.key)})
        sync_project(old.store, old.session, project)

        server.init_from_book(demo_book)       # upgrade to version 4
        assert server.required_version() == 4

        fresh = make_client(tmp_path, server, demo_book, "fresh", clock)
        old.session.set_rights(project, fresh.session.user_id, 2)
        refresh_projects(fresh.store, fresh.session)
        sync_project(fresh.store, fresh.session, project)
        (find,) = fresh.store.entries(mask="Find", project=project)
        assert find.values["count"] == model.Number(17)
        assert find.values["note"] == Text("keep me")
        assert "legacy_note" not in find.values

        # the old client migrates its store and keeps synchronizing
        old.store.close()
        reopened = LocalStore.open(tmp_path / "old.db", demo_book, clock=clock)
        assert apply_migrations(reopened, old.session) == 4
        report = sync_project(reopened, old.session, project)
        assert report.conflicts == 0
