# delegator/client.py
import asyncio
import logging
import time
import uuid
from typing import Optional, Tuple

from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PublicKey

from config.config import HANDSHAKE_TIMEOUT_SECONDS, MAX_FRAME_SIZE
from delegator.attestation import AttestationIdentity, AttestationSession, QuoteVerifier, Role
from delegator.errors import AttestationFailed, ChannelError, DelegatorError, ProtocolError, error_from_wire
from delegator.wire_protocol import (
    Frame,
    FrameStream,
    MessageType,
    SessionCipher,
    WireTap,
    decode_error,
    decode_hello_ack,
    decode_key_resp,
    decode_push_ack,
    derive_session_key,
    encode_key_fetch,
    encode_key_push,
)
from utils.common_utils import hex_preview, parse_host_port

logger = logging.getLogger(__name__)


class DelegatorClient:
    """One attested session with one key delegator"""

    def __init__(
            self,
            uri: str,
            identity: AttestationIdentity,
            verifier: QuoteVerifier,
            timeout: float = HANDSHAKE_TIMEOUT_SECONDS,
            wire_tap: WireTap = None,
    ):
        self.uri = uri
        self.host, self.port = parse_host_port(uri)
        self.identity = identity
        self.verifier = verifier
        self.timeout = timeout
        self.wire_tap = wire_tap
        self.session: Optional[AttestationSession] = None
        self._stream: Optional[FrameStream] = None
        self._cipher: Optional[SessionCipher] = None
        self._lock = asyncio.Lock()

    @property
    def connected(self) -> bool:
        return self._stream is not None and self.session is not None

    async def connect(self) -> AttestationSession:
        """Open the connection and run the mutual attestation handshake"""
        try:
            reader, writer = await asyncio.wait_for(asyncio.open_connection(self.host, self.port), self.timeout)
        except (OSError, asyncio.TimeoutError) as e:
            raise ChannelError(f"cannot reach delegator {self.uri}: {e}") from e
        stream = FrameStream(reader, writer, MAX_FRAME_SIZE, self.wire_tap)
        try:
            self.session, self._cipher = await self._handshake(stream)
        except BaseException:
            await stream.close()
            raise
        self._stream = stream
        return self.session

    async def _handshake(self, stream: FrameStream) -> Tuple[AttestationSession, SessionCipher]:
        ephemeral, quote = await self.identity.new_quote()
        hello = quote.encode()
        await stream.send(MessageType.HELLO, hello)
        try:
            reply = await asyncio.wait_for(stream.receive(), self.timeout)
        except asyncio.TimeoutError as e:
            raise ChannelError(f"delegator {self.uri} did not answer the handshake") from e

        if reply.msg_type is MessageType.ERROR:
            raise error_from_wire(*decode_error(reply.body))
        if reply.msg_type is not MessageType.HELLO_ACK:
            raise ProtocolError(f"expected HELLO_ACK, got {reply.msg_type.name}")

        session_id, server_quote = decode_hello_ack(reply.body)
        try:
            self.verifier.verify(server_quote, {Role.DELEGATOR})
        except AttestationFailed as e:
            logger.warning(f"❌ Delegator {self.uri} failed attestation: [{e.code}] {e}")
            raise

        shared = ephemeral.exchange(X25519PublicKey.from_public_bytes(server_quote.dh_public))
        session = AttestationSession(
            session_id=session_id,
            peer_measurement=server_quote.measurement,
            peer_role=server_quote.role,
            session_key=derive_session_key(shared, hello, reply.body),
        )
        session.established_at = session.last_used = time.time()
        logger.info(f"🔐 Attested delegator {self.uri} ({hex_preview(server_quote.measurement)}), "
                    f"session {session_id}")
        return session, SessionCipher(session.session_key, is_client=True)

    def _reply_error(self, frame: Frame) -> DelegatorError:
        try:
            body = self._cipher.open(frame.msg_type, frame.body)
        except DelegatorError:
            # errors raised before the session key was agreed come in plaintext
            body = frame.body
        return error_from_wire(*decode_error(body))

    async def _request(self, msg_type: MessageType, body: bytes, expected: MessageType) -> bytes:
        if not self.connected:
            raise ChannelError(f"no session with delegator {self.uri}")
        async with self._lock:
            try:
                await self._stream.send(msg_type, self._cipher.seal(msg_type, body))
                reply = await asyncio.wait_for(self._stream.receive(), self.timeout)
            except asyncio.TimeoutError as e:
                await self.close()
                raise ChannelError(f"delegator {self.uri} timed out") from e
            except ChannelError:
                await self.close()
                raise

            if reply.msg_type is MessageType.ERROR:
                error = self._reply_error(reply)
                if error.code in ("SESSION_EXPIRED", "PROTOCOL_ERROR", "REPLAY_DETECTED"):
                    await self.close()
                raise error
            if reply.msg_type is not expected:
                await self.close()
                raise ProtocolError(f"expected {expected.name}, got {reply.msg_type.name}")
            return self._cipher.open(reply.msg_type, reply.body)

    async def fetch_key(self, data_id: uuid.UUID) -> Tuple[uuid.UUID, bytes]:
        """(custodian_id, data_key) held by the delegator for data_id"""
        body = await self._request(MessageType.KEY_FETCH, encode_key_fetch(data_id), MessageType.KEY_RESP)
        returned_id, custodian_id, data_key = decode_key_resp(body)
        if returned_id != data_id:
            raise ProtocolError(f"asked for {data_id}, delegator answered for {returned_id}")
        return custodian_id, data_key

    async def push_key(self, data_id: uuid.UUID, custodian_id: uuid.UUID, data_key: bytes,
                       signature: bytes = b"") -> None:
        body = await self._request(MessageType.KEY_PUSH, encode_key_push(data_id, custodian_id, data_key, signature),
                                   MessageType.PUSH_ACK)
        if decode_push_ack(body) != data_id:
            raise ProtocolError("push acknowledged for the wrong data id")

    async def close(self):
        stream, self._stream = self._stream, None
        self.session = None
        self._cipher = None
        if stream is not None:
            await stream.close()

    async def __aenter__(self):
        await self.connect()
        return self

    async def __aexit__(self, exc_type, exc_val, exc_tb):
        await self.close()
