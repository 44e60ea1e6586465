# common_utils.py - Helpers shared by the PAD packages
import hashlib
import uuid
from typing import Tuple


def new_uuid() -> uuid.UUID:
    """Random (version 4) identifier for data, custodians and sessions"""
    return uuid.uuid4()


def coerce_uuid(value) -> uuid.UUID:
    """Accept a UUID, its string form or its 16 raw bytes"""
    if isinstance(value, uuid.UUID):
        return value
    if isinstance(value, (bytes, bytearray)):
        if len(value) != 16:
            raise ValueError(f"UUID bytes must be 16 long, got {len(value)}")
        return uuid.UUID(bytes=bytes(value))
    if isinstance(value, str):
        return uuid.UUID(value)
    raise TypeError(f"Cannot interpret {type(value).__name__} as UUID")


def sha256_digest(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def hex_preview(data: bytes, length: int = 8) -> str:
    """Short hex prefix of a digest for log lines (never use on key material)"""
    return data.hex()[:length * 2]


def parse_host_port(uri: str) -> Tuple[str, int]:
    """
    Parse a delegator URI of the form host:port.

    IPv6 hosts must be bracketed ("[::1]:7443").

    Raises:
        ValueError: when the URI is empty, has no port or the port is out of range
    """
    if not uri or not isinstance(uri, str):
        raise ValueError("delegator URI must be a non-empty host:port string")

    if uri.startswith("["):
        host, sep, port_text = uri[1:].partition("]:")
        if not sep:
            raise ValueError(f"malformed bracketed host in {uri!r}")
    else:
        host, sep, port_text = uri.rpartition(":")
        if not sep:
            raise ValueError(f"missing port in {uri!r}")

    if not host or any(ch.isspace() for ch in host):
        raise ValueError(f"missing or invalid host in {uri!r}")
    if not port_text.isdigit():
        raise ValueError(f"port must be numeric in {uri!r}")

    port = int(port_text)
    if not 0 < port < 65536:
        raise ValueError(f"port out of range in {uri!r}")
    return host, port


def format_host_port(host: str, port: int) -> str:
    if ":" in host:
        return f"[{host}]:{port}"
    return f"{host}:{port}"
