import pytest

from xbook import wire
from xbook.server import WireApi


@pytest.fixture
def api(server):
    return WireApi(server)


def call(api, request_type, payload=(), token=b""):
    reply = api.handle(wire.Message(request_type, token, tuple(payload)))
    return reply


def login(api, username="ada"):
    call(api, wire.RequestType.REGISTER,
         [wire.text(username), wire.text("A"), wire.text("L"),
          wire.text(f"{username}@x.org"), wire.text("s3cretpw!")])
    reply = call(api, wire.RequestType.LOGIN,
                 [wire.text(username), wire.text("s3cretpw!")])
    assert reply.request_type == wire.RequestType.LOGIN
    return reply.payload[0].value


class TestDispatch:
    def test_get_version_reply(self, api):
        reply = call(api, wire.RequestType.GET_VERSION)
        assert reply.request_type == wire.RequestType.GET_VERSION
        assert reply.payload[0].value == 4

    def test_register_login_issue(self, api):
        token = login(api)
        reply = call(api, wire.RequestType.ISSUE_DBID, token=token)
        assert reply.payload[0].value == 1

    def test_bad_token_is_error_401(self, api):
        reply = call(api, wire.RequestType.ISSUE_DBID, token=b"bogus")
        assert reply.request_type == wire.RequestType.ERROR
        assert reply.payload[0].value == 401
        assert reply.payload[1].value == "unauthorized"

    def test_request_arity_enforced(self, api):
        reply = call(api, wire.RequestType.GET_MIGRATIONS, [wire.text("four")])
        assert reply.request_type == wire.RequestType.ERROR
        assert reply.payload[0].value == 400

    def test_full_armored_path(self, api):
        armored = wire.encode_message(wire.Message(wire.RequestType.GET_VERSION, b"", ()))
        out = api.handle_armored(armored)
        reply = wire.decode_message(out)
        assert reply.payload[0].value == 4

    def test_armored_garbage_becomes_error_reply(self, api):
        reply = wire.decode_message(api.handle_armored("%%% not a frame %%%"))
        assert reply.request_type == wire.RequestType.ERROR
        assert reply.payload[0].value == 400

    def test_push_pull_through_wire(self, api):
        token = login(api)
        dbid = call(api, wire.RequestType.ISSUE_DBID, token=token).payload[0].value
        project = call(api, wire.RequestType.CREATE_PROJECT,
                       [wire.text("dig")], token=token).payload[0]
        project_key = project.value[0]
        record = wire.entry_record(
            wire.key(1, dbid), wire.text("Find"), project_key,
            wire.mapping([(wire.text("species"), wire.code("species", 1))]),
            wire.int64(0), wire.boolean(False), wire.timestamp(0))
        reply = call(api, wire.RequestType.PUSH,
                     [project_key, wire.array([record])], token=token)
        assert reply.request_type == wire.RequestType.PUSH
        (outcome,) = reply.payload[0].value
        assert outcome.value[1].value == 0          # committed
        assert outcome.value[2].value == 1          # stamp
        reply = call(api, wire.RequestType.PULL,
                     [project_key, wire.int64(0)], token=token)
        assert len(reply.payload[0].value) == 1
        assert reply.payload[1].value == 1

    def test_list_projects_shape(self, api):
        token = login(api)
        call(api, wire.RequestType.CREATE_PROJECT, [wire.text("dig")], token=token)
        reply = call(api, wire.RequestType.LIST_PROJECTS, token=token)
        (item,) = reply.payload[0].value
        project, count, max_stamp = item.value
        assert project.tag == wire.TAG_PROJECT
        assert count.value == 0 and max_stamp.value == 0

    def test_set_rights_unknown_right_rejected(self, api):
        token = login(api)
        project = call(api, wire.RequestType.CREATE_PROJECT,
                       [wire.text("dig")], token=token).payload[0]
        reply = call(api, wire.RequestType.SET_RIGHTS,
                     [project.value[0], wire.int64(1), wire.int64(9)], token=token)
        assert reply.request_type == wire.RequestType.ERROR
        assert reply.payload[0].value == 400
