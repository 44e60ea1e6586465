# delegator/wire_protocol.py
"""
Key delegator wire protocol.

Frame:  u32 length | u8 type | body        (length counts type + body, LE)

HELLO      client quote
HELLO_ACK  session_id (16) | delegator quote
KEY_FETCH  data_id (16)
KEY_RESP   data_id (16) | custodian_id (16) | key (u16 len + bytes)
KEY_PUSH   data_id (16) | custodian_id (16) | key (u16 len + bytes) | signature (u16 len + bytes)
PUSH_ACK   data_id (16)
ERROR      code u16 | message (u16 len + UTF-8)

After the handshake every body is sealed: u64 seq | AEAD ciphertext, with
nonce = direction tag (4) | seq (8) and associated data = type | seq. Each
direction counts its own sequence from zero.
"""
import asyncio
import hashlib
import logging
import struct
import uuid
from dataclasses import dataclass
from enum import IntEnum
from typing import Callable, Optional, Tuple

from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from config.config import MAX_FRAME_SIZE
from delegator.attestation import AttestationQuote
from delegator.errors import ChannelError, ErrorCode, ProtocolError, ReplayDetected
from pad.crypto_suite import SUITE_AES_256_GCM, get_suite
from pad.errors import IntegrityFailure
from utils.binary_codec import ByteReader, ByteWriter, DecodeError

logger = logging.getLogger(__name__)

SESSION_KEY_INFO = b"pad-delegator-session-v1"
SESSION_SUITE = SUITE_AES_256_GCM
CLIENT_TO_SERVER = b"C2S\x00"
SERVER_TO_CLIENT = b"S2C\x00"

_LENGTH = struct.Struct("<I")


class MessageType(IntEnum):
    HELLO = 0x01
    HELLO_ACK = 0x02
    KEY_FETCH = 0x03
    KEY_RESP = 0x04
    KEY_PUSH = 0x05
    PUSH_ACK = 0x06
    ERROR = 0x0F


class FrameAuthenticationError(ProtocolError):
    """A sealed frame did not authenticate under the session key"""


@dataclass(frozen=True)
class Frame:
    msg_type: MessageType
    body: bytes


def encode_frame(msg_type: MessageType, body: bytes) -> bytes:
    return _LENGTH.pack(len(body) + 1) + bytes([int(msg_type)]) + body


WireTap = Callable[[str, bytes], None]


class FrameStream:
    """Framed reads and writes over an asyncio stream pair"""

    def __init__(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter,
                 max_frame_size: int = MAX_FRAME_SIZE, wire_tap: WireTap = None):
        self.reader = reader
        self.writer = writer
        self.max_frame_size = max_frame_size
        # receives ("send"|"recv", raw frame bytes); used for wire capture
        self.wire_tap = wire_tap

    async def send(self, msg_type: MessageType, body: bytes):
        data = encode_frame(msg_type, body)
        if self.wire_tap:
            self.wire_tap("send", data)
        try:
            self.writer.write(data)
            await self.writer.drain()
        except (ConnectionError, OSError) as e:
            raise ChannelError(f"send failed: {e}") from e

    async def receive(self) -> Frame:
        try:
            header = await self.reader.readexactly(_LENGTH.size)
            (length,) = _LENGTH.unpack(header)
            if length == 0 or length > self.max_frame_size:
                raise ProtocolError(f"frame length {length} outside 1..{self.max_frame_size}")
            data = await self.reader.readexactly(length)
        except asyncio.IncompleteReadError as e:
            raise ChannelError("connection closed by peer") from e
        except (ConnectionError, OSError) as e:
            raise ChannelError(f"receive failed: {e}") from e
        if self.wire_tap:
            self.wire_tap("recv", header + data)
        try:
            msg_type = MessageType(data[0])
        except ValueError as e:
            raise ProtocolError(f"unknown message type 0x{data[0]:02x}") from e
        return Frame(msg_type, data[1:])

    async def close(self):
        try:
            self.writer.close()
            await self.writer.wait_closed()
        except (ConnectionError, OSError):
            pass


def derive_session_key(shared_secret: bytes, hello: bytes, hello_ack: bytes) -> bytes:
    """HKDF-SHA256 bound to the handshake transcript"""
    salt = hashlib.sha256(hello + hello_ack).digest()
    return HKDF(algorithm=hashes.SHA256(), length=32, salt=salt, info=SESSION_KEY_INFO).derive(shared_secret)


class SessionCipher:
    """Per-direction sequence numbers and AEAD sealing of frame bodies"""

    def __init__(self, session_key: bytes, is_client: bool):
        self._suite = get_suite(SESSION_SUITE)
        self._key = session_key
        self._send_tag = CLIENT_TO_SERVER if is_client else SERVER_TO_CLIENT
        self._recv_tag = SERVER_TO_CLIENT if is_client else CLIENT_TO_SERVER
        self.send_seq = 0
        self.recv_seq = 0

    @staticmethod
    def _aad(msg_type: MessageType, seq: int) -> bytes:
        return ByteWriter().u8(int(msg_type)).u64(seq).getvalue()

    def seal(self, msg_type: MessageType, body: bytes) -> bytes:
        seq = self.send_seq
        nonce = self._send_tag + struct.pack("<Q", seq)
        sealed = self._suite.seal(self._key, nonce, body, self._aad(msg_type, seq))
        self.send_seq += 1
        return struct.pack("<Q", seq) + sealed

    def open(self, msg_type: MessageType, sealed_body: bytes) -> bytes:
        if len(sealed_body) < 8 + self._suite.tag_length:
            raise ProtocolError("sealed frame is too short")
        (seq,) = struct.unpack_from("<Q", sealed_body)
        if seq != self.recv_seq:
            raise ReplayDetected(f"sequence {seq} received, expected {self.recv_seq}")
        nonce = self._recv_tag + sealed_body[:8]
        try:
            body = self._suite.open(self._key, nonce, sealed_body[8:], self._aad(msg_type, seq))
        except IntegrityFailure as e:
            raise FrameAuthenticationError("sealed frame does not authenticate under the session key") from e
        self.recv_seq += 1
        return body


def encode_hello_ack(session_id: uuid.UUID, quote: AttestationQuote) -> bytes:
    return session_id.bytes + quote.encode()


def decode_hello_ack(body: bytes) -> Tuple[uuid.UUID, AttestationQuote]:
    if len(body) < 16:
        raise ProtocolError("HELLO_ACK is too short")
    return uuid.UUID(bytes=body[:16]), AttestationQuote.decode(body[16:])


def encode_key_fetch(data_id: uuid.UUID) -> bytes:
    return data_id.bytes


def decode_key_fetch(body: bytes) -> uuid.UUID:
    if len(body) != 16:
        raise ProtocolError("KEY_FETCH body must be a 16-byte data id")
    return uuid.UUID(bytes=body)


def encode_key_resp(data_id: uuid.UUID, custodian_id: uuid.UUID, data_key: bytes) -> bytes:
    return ByteWriter().uuid(data_id).uuid(custodian_id).bytes16(data_key).getvalue()


def decode_key_resp(body: bytes) -> Tuple[uuid.UUID, uuid.UUID, bytes]:
    reader = ByteReader(body)
    try:
        result = reader.uuid(), reader.uuid(), reader.bytes16()
        reader.expect_end()
    except DecodeError as e:
        raise ProtocolError(f"malformed KEY_RESP: {e}") from e
    return result


def encode_key_push(data_id: uuid.UUID, custodian_id: uuid.UUID, data_key: bytes, signature: bytes) -> bytes:
    return ByteWriter().uuid(data_id).uuid(custodian_id).bytes16(data_key).bytes16(signature).getvalue()


def decode_key_push(body: bytes) -> Tuple[uuid.UUID, uuid.UUID, bytes, bytes]:
    reader = ByteReader(body)
    try:
        result = reader.uuid(), reader.uuid(), reader.bytes16(), reader.bytes16()
        reader.expect_end()
    except DecodeError as e:
        raise ProtocolError(f"malformed KEY_PUSH: {e}") from e
    return result


def encode_push_ack(data_id: uuid.UUID) -> bytes:
    return data_id.bytes


def decode_push_ack(body: bytes) -> uuid.UUID:
    if len(body) != 16:
        raise ProtocolError("PUSH_ACK body must be a 16-byte data id")
    return uuid.UUID(bytes=body)


def encode_error(code: ErrorCode, message: str) -> bytes:
    return ByteWriter().u16(int(code)).str16(message[:1024]).getvalue()


def decode_error(body: bytes) -> Tuple[int, str]:
    reader = ByteReader(body)
    try:
        return reader.u16(), reader.str16()
    except DecodeError as e:
        raise ProtocolError(f"malformed ERROR frame: {e}") from e
