"""Server configuration file: plain key=value text.

Recognized keys: storage (SQLite path), bind (host:port), token_ttl
(seconds), allow_insecure (true/false), scrypt_cost (power-of-two KDF
cost). Unknown keys are rejected so typos do not silently fall back to
defaults.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path


class ConfigError(Exception):
    pass


@dataclass
class ServerConfig:
    storage: str = "xbook-server.db"
    bind_host: str = "127.0.0.1"
    bind_port: int = 8080
    token_ttl_s: int = 24 * 3600
    allow_insecure: bool = False
    scrypt_cost: int = 2**14


_BOOLS = {"true": True, "false": False, "yes": True, "no": False, "1": True, "0": False}


def parse_config(text: str) -> ServerConfig:
    cfg = ServerConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = key.strip(), value.strip()
        if key == "storage":
            cfg.storage = value
        elif key == "bind":
            host, colon, port = value.rpartition(":")
            if not colon:
                raise ConfigError(f"line {lineno}: bind must be host:port")
            cfg.bind_host = host
            cfg.bind_port = int(port)
        elif key == "token_ttl":
            cfg.token_ttl_s = int(value)
        elif key == "allow_insecure":
            if value.lower() not in _BOOLS:
                raise ConfigError(f"line {lineno}: allow_insecure must be true/false")
            cfg.allow_insecure = _BOOLS[value.lower()]
        elif key == "scrypt_cost":
            cfg.scrypt_cost = int(value)
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    return cfg


def load_config(path: str | Path) -> ServerConfig:
    try:
        return parse_config(Path(path).read_text("utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
