import sys
from pathlib import Path

import pytest

# test helpers (wiregen etc.) live next to the tests
sys.path.insert(0, str(Path(__file__).parent))

from xbook import book as bookmod
from xbook.client import LocalStore
from xbook.client.identity import InstallMarker, ensure_database_id
from xbook.client.sync import ServerSession
from xbook.server import ServerStorage, SyncServer, WireApi
from xbook.transport import InProcessTransport


class FakeClock:
    """Deterministic clock; tests advance it to expire sessions."""

    def __init__(self, start: float = 1_700_000_000.0):
        self.now = start

    def __call__(self) -> float:
        return self.now

    def advance(self, seconds: float) -> None:
        self.now += seconds


@pytest.fixture
def clock():
    return FakeClock()


@pytest.fixture
def demo_book():
    return bookmod.reference_book()


def make_server(tmp_path, clock, name="server.db", **kwargs) -> SyncServer:
    storage = ServerStorage(str(tmp_path / name))
    kwargs.setdefault("scrypt_cost", 2**4)  # keep the KDF cheap in tests
    return SyncServer(storage, clock=clock, **kwargs)


@pytest.fixture
def server(tmp_path, clock, demo_book):
    s = make_server(tmp_path, clock)
    s.init_from_book(demo_book)
    yield s
    s.storage.close()


class ClientEnv:
    """One simulated client installation: store + install marker + an
    authenticated session against an in-process server."""

    def __init__(self, tmp_path, server, book, name, clock, register=True):
        self.name = name
        self.session = ServerSession(InProcessTransport(WireApi(server)))
        if register:
            self.session.register(name, name.title(), "T.", f"{name}@x.org", "s3cretpw!")
        self.session.login(name, "s3cretpw!")
        self.store = LocalStore.create(tmp_path / f"{name}.db", book, clock=clock)
        self.marker = InstallMarker(tmp_path / f"{name}.marker")
        self.dbid = ensure_database_id(self.store, self.marker, self.session)


def make_client(tmp_path, server, book, name, clock, register=True) -> ClientEnv:
    return ClientEnv(tmp_path, server, book, name, clock, register=register)
