import hashlib
import threading

import pytest

from xbook import model
from xbook.model import Entry, GlobalKey, Right
from xbook.server import ServerError
from conftest import make_server


def register_and_login(server, username="ada", email=None):
    email = email or f"{username}@example.org"
    user_id = server.register(username, "Ada", "L.", email, "s3cretpw!")
    token, _, _ = server.login(username, "s3cretpw!")
    return user_id, token


def make_entry(key, project, species=1, count=5, version=0, deleted=False, mask="Find"):
    values = {"species": model.Code("species", species)}
    if count is not None:
        values["count"] = model.Number(count)
    return Entry(key=key, mask=mask, project=project, values=values,
                 version=version, deleted=deleted, modified_ms=1_700_000_000_000)


class TestAccounts:
    def test_first_user_gets_id_one(self, server):
        assert server.register("ada", "Ada", "L.", "ada@x.org", "s3cretpw!") == 1

    def test_duplicate_username_rejected(self, server):
        server.register("ada", "Ada", "L.", "ada@x.org", "s3cretpw!")
        with pytest.raises(ServerError) as e:
            server.register("ada", "Other", "O.", "other@x.org", "diffpass99")
        assert e.value.code == 409

    def test_duplicate_email_rejected(self, server):
        server.register("ada", "Ada", "L.", "ada@x.org", "s3cretpw!")
        with pytest.raises(ServerError):
            server.register("bob", "Bob", "B.", "ada@x.org", "diffpass99")

    def test_weak_password_rejected(self, server):
        with pytest.raises(ServerError) as e:
            server.register("ada", "Ada", "L.", "ada@x.org", "abc")
        assert e.value.code == 400

    def test_login_token_and_ttl(self, server, clock):
        server.register("ada", "Ada", "L.", "ada@x.org", "s3cretpw!")
        token, user_id, expires_ms = server.login("ada", "s3cretpw!")
        assert len(token) == 32
        assert user_id == 1
        assert expires_ms == int(clock.now * 1000) + 24 * 3600 * 1000

    def test_wrong_password_uniform_401(self, server):
        server.register("ada", "Ada", "L.", "ada@x.org", "s3cretpw!")
        with pytest.raises(ServerError) as wrong_pw:
            server.login("ada", "nope-nope")
        with pytest.raises(ServerError) as wrong_user:
            server.login("nobody", "nope-nope")
        assert wrong_pw.value.code == wrong_user.value.code == 401
        assert wrong_pw.value.message == wrong_user.value.message

    def test_token_expires(self, server, clock):
        _, token = register_and_login(server)
        server.issue_database_id(token)
        clock.advance(24 * 3600 + 1)
        with pytest.raises(ServerError) as e:
            server.issue_database_id(token)
        assert e.value.code == 401

    def test_change_password(self, server):
        _, token = register_and_login(server)
        server.change_password(token, "s3cretpw!", "evenbetter1")
        server.login("ada", "evenbetter1")
        with pytest.raises(ServerError):
            server.login("ada", "s3cretpw!")

    def test_change_password_wrong_old_keeps_hash(self, server):
        _, token = register_and_login(server)
        with pytest.raises(ServerError):
            server.change_password(token, "wrong-old!", "evenbetter1")
        server.login("ada", "s3cretpw!")

    def test_change_password_invalidates_other_sessions(self, server):
        register_and_login(server)
        token_a, _, _ = server.login("ada", "s3cretpw!")
        token_b, _, _ = server.login("ada", "s3cretpw!")
        server.change_password(token_a, "s3cretpw!", "evenbetter1")
        server.issue_database_id(token_a)  # current session survives
        with pytest.raises(ServerError):
            server.issue_database_id(token_b)

    def test_reset_password_delivers_code(self, tmp_path, clock, demo_book):
        sent = []
        server = make_server(tmp_path, clock, reset_delivery=lambda e, c: sent.append((e, c)))
        server.init_from_book(demo_book)
        server.register("ada", "Ada", "L.", "ada@x.org", "s3cretpw!")
        server.reset_password("ada@x.org")
        assert len(sent) == 1 and sent[0][0] == "ada@x.org"

    def test_reset_password_unknown_email_silently_ok(self, tmp_path, clock, demo_book):
        sent = []
        server = make_server(tmp_path, clock, reset_delivery=lambda e, c: sent.append(c))
        server.init_from_book(demo_book)
        server.reset_password("nobody@x.org")
        assert sent == []


class TestDatabaseIdIssuance:
    def test_first_call_on_fresh_server_returns_one(self, server):
        _, token = register_and_login(server)
        assert server.issue_database_id(token) == 1

    def test_successive_calls_increase(self, server):
        _, token = register_and_login(server)
        assert [server.issue_database_id(token) for _ in range(3)] == [1, 2, 3]

    def test_requires_token(self, server):
        with pytest.raises(ServerError) as e:
            server.issue_database_id(b"")
        assert e.value.code == 401


class TestSchemaDistribution:
    def test_required_version_from_book(self, server):
        assert server.required_version() == 4

    def test_current_client_gets_no_migrations(self, server):
        _, token = register_and_login(server)
        assert server.migrations_from(token, 4) == []

    def test_chain_is_ordered(self, server):
        _, token = register_and_login(server)
        ms = server.migrations_from(token, 2)
        assert [m.from_version for m in ms] == [2, 3]

    def test_version_ahead_refused(self, server):
        _, token = register_and_login(server)
        with pytest.raises(ServerError) as e:
            server.migrations_from(token, 9)
        assert e.value.code == 409

    def test_code_tables_up_to_date(self, server):
        _, token = register_and_login(server)
        assert server.code_tables_newer(token, {"species": 1, "materials": 1}) == []

    def test_code_tables_stale_returns_snapshot(self, server):
        _, token = register_and_login(server)
        server.update_code_table(model.CodeTable("species", 2, {1: {"en": "Cattle"}}))
        got = server.code_tables_newer(token, {"species": 1, "materials": 1})
        assert [t.name for t in got] == ["species"]
        assert got[0].version == 2

    def test_unknown_known_table_ignored(self, server):
        _, token = register_and_login(server)
        assert server.code_tables_newer(token, {"martian": 3, "species": 1,
                                                "materials": 1}) == []

    def test_code_table_version_must_increase(self, server):
        with pytest.raises(ServerError):
            server.update_code_table(model.CodeTable("species", 1, {}))


class TestProjects:
    def test_fresh_user_sees_nothing(self, server):
        _, token = register_and_login(server)
        assert server.list_projects(token) == []

    def test_create_and_list(self, server):
        _, token = register_and_login(server)
        project = server.create_project(token, "dig2024")
        assert project.key.id >= 1 and project.key.dbid >= 1
        listed = server.list_projects(token)
        assert [(p.name, count, stamp) for p, count, stamp in listed] \
            == [("dig2024", 0, 0)]

    def test_grant_read_makes_project_visible(self, server):
        _, owner_token = register_and_login(server, "ada")
        bob_id, bob_token = register_and_login(server, "bob")
        project = server.create_project(owner_token, "dig")
        assert server.list_projects(bob_token) == []
        server.set_rights(owner_token, project.key, bob_id, Right.READ)
        assert [p.name for p, _, _ in server.list_projects(bob_token)] == ["dig"]

    def test_rights_revocation(self, server):
        _, owner_token = register_and_login(server, "ada")
        bob_id, bob_token = register_and_login(server, "bob")
        project = server.create_project(owner_token, "dig")
        server.set_rights(owner_token, project.key, bob_id, Right.READ)
        server.set_rights(owner_token, project.key, bob_id, Right.NONE)
        assert server.list_projects(bob_token) == []

    def test_only_owner_changes_rights(self, server):
        _, owner_token = register_and_login(server, "ada")
        bob_id, bob_token = register_and_login(server, "bob")
        project = server.create_project(owner_token, "dig")
        server.set_rights(owner_token, project.key, bob_id, Right.WRITE)
        with pytest.raises(ServerError) as e:
            server.set_rights(bob_token, project.key, bob_id, Right.WRITE)
        assert e.value.code == 403

    def test_project_keys_use_a_real_dbid(self, server):
        """The server mints project keys under its own lazily issued
        Database ID; a client asking afterwards still gets a fresh one."""
        _, token = register_and_login(server)
        project = server.create_project(token, "dig")
        client_dbid = server.issue_database_id(token)
        assert client_dbid != project.key.dbid


class TestPush:
    @pytest.fixture
    def ctx(self, server):
        _, token = register_and_login(server)
        dbid = server.issue_database_id(token)
        project = server.create_project(token, "dig")
        return server, token, dbid, project

    def test_first_commit_gets_stamp_one(self, ctx):
        server, token, dbid, project = ctx
        e = make_entry(GlobalKey(1, dbid), project.key)
        (outcome,) = server.push(token, project.key, [e])
        assert outcome.committed and outcome.stamp == 1

    def test_stale_push_conflicts_with_server_row(self, ctx):
        server, token, dbid, project = ctx
        e = make_entry(GlobalKey(1, dbid), project.key)
        server.push(token, project.key, [e])                      # stamp 1
        e2 = make_entry(GlobalKey(1, dbid), project.key, count=9, version=1)
        server.push(token, project.key, [e2])                     # stamp 2
        stale = make_entry(GlobalKey(1, dbid), project.key, count=7, version=1)
        (outcome,) = server.push(token, project.key, [stale])
        assert not outcome.committed
        assert outcome.server_entry.version == 2
        assert outcome.server_entry.values["count"] == model.Number(9)

    def test_conflict_never_modifies_server_state(self, ctx):
        server, token, dbid, project = ctx
        server.push(token, project.key, [make_entry(GlobalKey(1, dbid), project.key)])
        before = self._state_hash(server, token, project.key)
        stale = make_entry(GlobalKey(1, dbid), project.key, count=9, version=99)
        (outcome,) = server.push(token, project.key, [stale])
        assert not outcome.committed
        assert self._state_hash(server, token, project.key) == before

    @staticmethod
    def _state_hash(server, token, project_key):
        entries, max_stamp = server.pull(token, project_key, 0)
        blob = repr([(e.key, e.version, sorted(e.values.items(), key=lambda kv: kv[0]),
                      e.deleted) for e in entries]) + str(max_stamp)
        return hashlib.sha256(blob.encode()).hexdigest()

    def test_tombstones_commit_like_edits(self, ctx):
        server, token, dbid, project = ctx
        e = make_entry(GlobalKey(1, dbid), project.key)
        (first,) = server.push(token, project.key, [e])
        tomb = make_entry(GlobalKey(1, dbid), project.key, version=first.stamp, deleted=True)
        (outcome,) = server.push(token, project.key, [tomb])
        assert outcome.committed and outcome.stamp == 2
        entries, _ = server.pull(token, project.key, 0)
        assert entries[0].deleted

    def test_requires_write_right(self, server):
        _, owner_token = register_and_login(server, "ada")
        bob_id, bob_token = register_and_login(server, "bob")
        project = server.create_project(owner_token, "dig")
        server.set_rights(owner_token, project.key, bob_id, Right.READ)
        bob_dbid = server.issue_database_id(bob_token)
        with pytest.raises(ServerError) as e:
            server.push(bob_token, project.key, [make_entry(GlobalKey(1, bob_dbid), project.key)])
        assert e.value.code == 403

    def test_unknown_mask_rejected(self, ctx):
        server, token, dbid, project = ctx
        e = make_entry(GlobalKey(1, dbid), project.key, mask="Martian")
        with pytest.raises(ServerError) as err:
            server.push(token, project.key, [e])
        assert err.value.code == 400

    def test_disabled_mask_rejected_without_code_change(self, ctx):
        server, token, dbid, project = ctx
        server.set_mask_enabled("Find", False)
        with pytest.raises(ServerError):
            server.push(token, project.key, [make_entry(GlobalKey(1, dbid), project.key)])
        server.set_mask_enabled("Find", True)
        server.push(token, project.key, [make_entry(GlobalKey(1, dbid), project.key)])

    def test_field_outside_synced_set_rejected(self, ctx):
        server, token, dbid, project = ctx
        with server.storage.write() as c:
            c.execute("UPDATE sync_meta SET synced_fields = ? WHERE mask = ?",
                      ('["species"]', "Find"))
        e = make_entry(GlobalKey(1, dbid), project.key)  # carries count too
        with pytest.raises(ServerError) as err:
            server.push(token, project.key, [e])
        assert "count" in err.value.message

    def test_entry_must_belong_to_pushed_project(self, ctx):
        server, token, dbid, project = ctx
        other = server.create_project(token, "other")
        e = make_entry(GlobalKey(1, dbid), other.key)
        with pytest.raises(ServerError):
            server.push(token, project.key, [e])

    def test_concurrent_disjoint_pushes_all_commit_gap_free(self, ctx):
        server, token, dbid, project = ctx
        batches = [
            [make_entry(GlobalKey(i, dbid), project.key) for i in range(1, 6)],
            [make_entry(GlobalKey(i, dbid), project.key) for i in range(6, 11)],
            [make_entry(GlobalKey(i, dbid), project.key) for i in range(11, 16)],
        ]
        results, errors = [], []

        def pusher(batch):
            try:
                results.extend(server.push(token, project.key, batch))
            except Exception as e:  # pragma: no cover
                errors.append(e)

        threads = [threading.Thread(target=pusher, args=(b,)) for b in batches]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        assert all(o.committed for o in results)
        assert sorted(o.stamp for o in results) == list(range(1, 16))


class TestPull:
    @pytest.fixture
    def ctx(self, server):
        _, token = register_and_login(server)
        dbid = server.issue_database_id(token)
        project = server.create_project(token, "dig")
        for i in range(1, 4):
            server.push(token, project.key, [make_entry(GlobalKey(i, dbid), project.key)])
        return server, token, dbid, project

    def test_nothing_new_at_max_stamp(self, ctx):
        server, token, _, project = ctx
        _, max_stamp = server.pull(token, project.key, 0)
        entries, again = server.pull(token, project.key, max_stamp)
        assert entries == [] and again == max_stamp

    def test_initial_pull_returns_everything(self, ctx):
        server, token, _, project = ctx
        entries, max_stamp = server.pull(token, project.key, 0)
        assert len(entries) == 3 and max_stamp == 3

    def test_differential_pull_after_push(self, ctx):
        server, token, dbid, project = ctx
        _, since = server.pull(token, project.key, 0)
        new = [make_entry(GlobalKey(i, dbid), project.key) for i in (10, 11)]
        server.push(token, project.key, new)
        entries, _ = server.pull(token, project.key, since)
        assert sorted(e.key.id for e in entries) == [10, 11]

    def test_pull_monotonicity(self, ctx):
        server, token, _, project = ctx
        full, _ = server.pull(token, project.key, 0)
        part, _ = server.pull(token, project.key, 2)
        older = [e for e in full if e.version <= 2]
        assert {(e.key, e.version) for e in part} | {(e.key, e.version) for e in older} \
            == {(e.key, e.version) for e in full}

    def test_requires_read_right(self, ctx):
        server, _, _, project = ctx
        _, intruder = register_and_login(server, "eve")
        with pytest.raises(ServerError) as e:
            server.pull(intruder, project.key, 0)
        assert e.value.code == 403

    def test_stamp_integrity_log(self, ctx):
        server, token, dbid, project = ctx
        server.push(token, project.key,
                    [make_entry(GlobalKey(1, dbid), project.key, count=8, version=1)])
        with server.storage.conn() as c:
            stamps = [r["stamp"] for r in c.execute(
                "SELECT stamp FROM commit_log WHERE project_id = ? AND project_dbid = ? "
                "ORDER BY stamp", (project.key.id, project.key.dbid))]
        _, max_stamp = server.pull(token, project.key, 0)
        assert stamps == list(range(1, max_stamp + 1))
