"""Central synchronization service."""

from .core import ServerError, SyncServer  # noqa: F401
from .storage import ServerStorage  # noqa: F401
from .wire_api import WireApi  # noqa: F401
