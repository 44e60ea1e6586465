# delegator/server.py
"""
Key delegator service.

Every connection runs a mutual attestation handshake and then a sealed
message loop serving KEY_FETCH and KEY_PUSH. The handshake and each sealed
request are separate steps so that a load-balancing front can hand them to
different instances. Errors before the handshake is complete are sent as
plaintext ERROR frames and the connection is closed.
"""
import asyncio
import logging
import time
import uuid
from dataclasses import asdict, dataclass
from typing import Dict, Optional, Set, Tuple

from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PublicKey

from config.config import (
    ACCEPT_MIDDLEWARE_PROVISIONING,
    DELEGATOR_IDLE_TIMEOUT_SECONDS,
    HANDSHAKE_TIMEOUT_SECONDS,
    MAX_FRAME_SIZE,
)
from delegator.attestation import AttestationIdentity, AttestationQuote, AttestationSession, QuoteVerifier, Role
from delegator.custodian import CustodianDirectory, verify_push_signature
from delegator.errors import (
    AttestationFailed,
    BindError,
    ChannelError,
    DelegatorError,
    DuplicateConflict,
    ErrorCode,
    NotCustodian,
    ProtocolError,
    ReplayDetected,
)
from delegator.key_table import KeyOrigin, KeyRecord, KeyTable
from delegator.wire_protocol import (
    Frame,
    FrameAuthenticationError,
    FrameStream,
    MessageType,
    SessionCipher,
    derive_session_key,
    decode_key_fetch,
    decode_key_push,
    encode_error,
    encode_hello_ack,
    encode_key_resp,
    encode_push_ack,
)
from utils.common_utils import format_host_port, hex_preview, new_uuid

logger = logging.getLogger(__name__)

CLIENT_ROLES = frozenset({Role.CONSUMER_MIDDLEWARE, Role.PRODUCER})
MAX_KEY_LENGTH = 64


async def send_plain_error(stream: FrameStream, code: ErrorCode, message: str):
    try:
        await stream.send(MessageType.ERROR, encode_error(code, message))
    except ChannelError:
        pass


async def receive_hello(stream: FrameStream, timeout: float) -> Frame:
    """First frame of a connection, which must be a HELLO"""
    try:
        hello = await asyncio.wait_for(stream.receive(), timeout)
    except asyncio.TimeoutError as e:
        raise ProtocolError("handshake timed out") from e
    except ProtocolError as e:
        await send_plain_error(stream, ErrorCode.PROTOCOL_ERROR, str(e))
        raise

    if hello.msg_type is not MessageType.HELLO:
        message = f"{hello.msg_type.name} before handshake"
        await send_plain_error(stream, ErrorCode.PROTOCOL_ERROR, message)
        raise ProtocolError(message)
    return hello


async def next_frame(stream: FrameStream, idle_timeout: float) -> Optional[Frame]:
    """Next request of an attested session, None once it has been idle for idle_timeout"""
    try:
        return await asyncio.wait_for(stream.receive(), idle_timeout)
    except asyncio.TimeoutError:
        return None


def report_connection_end(name: str, error: Exception):
    if isinstance(error, ChannelError):
        logger.debug(f"{name}: connection ended: {error}")
    elif isinstance(error, DelegatorError):
        logger.warning(f"{name}: closing connection: [{error.code}] {error}")
    else:
        logger.error(f"❌ {name}: unexpected error on connection: {error}", exc_info=error)


@dataclass
class DelegatorStats:
    connections: int = 0
    attestations: int = 0
    attestation_failures: int = 0
    fetches: int = 0
    fetch_misses: int = 0
    pushes: int = 0
    push_rejections: int = 0
    active_sessions: int = 0
    expired_sessions: int = 0

    def to_dict(self) -> Dict[str, int]:
        return asdict(self)


class KeyDelegatorServer:
    def __init__(
            self,
            identity: AttestationIdentity,
            verifier: QuoteVerifier,
            key_table: KeyTable,
            custodians: CustodianDirectory = None,
            idle_timeout: float = DELEGATOR_IDLE_TIMEOUT_SECONDS,
            handshake_timeout: float = HANDSHAKE_TIMEOUT_SECONDS,
            accept_middleware_provisioning: bool = ACCEPT_MIDDLEWARE_PROVISIONING,
            max_frame_size: int = MAX_FRAME_SIZE,
            name: str = "delegator",
    ):
        if identity.role is not Role.DELEGATOR:
            raise ValueError("a delegator must attest with the DELEGATOR role")
        self.identity = identity
        self.verifier = verifier
        self.key_table = key_table
        self.custodians = custodians or CustodianDirectory()
        self.idle_timeout = idle_timeout
        self.handshake_timeout = handshake_timeout
        self.accept_middleware_provisioning = accept_middleware_provisioning
        self.max_frame_size = max_frame_size
        self.name = name
        self.stats = DelegatorStats()
        self.sessions: Dict[uuid.UUID, AttestationSession] = {}
        self._server: Optional[asyncio.AbstractServer] = None
        self._streams: Set[FrameStream] = set()
        self.host: Optional[str] = None
        self.port: Optional[int] = None

    @property
    def uri(self) -> str:
        return format_host_port(self.host, self.port)

    async def start(self, host: str, port: int) -> Tuple[str, int]:
        """Bind and accept connections; port 0 picks an ephemeral port"""
        try:
            self._server = await asyncio.start_server(self.handle_connection, host, port)
        except OSError as e:
            raise BindError(f"cannot bind {self.name} to {host}:{port}: {e}") from e
        self.host, self.port = self._server.sockets[0].getsockname()[:2]
        logger.info(f"✅ Key delegator {self.name} listening on {self.uri}")
        return self.host, self.port

    async def stop(self):
        if self._server is not None:
            self._server.close()
        for stream in list(self._streams):
            await stream.close()
        if self._server is not None:
            await self._server.wait_closed()
            self._server = None
        logger.info(f"🛑 Key delegator {self.name} stopped")

    async def __aenter__(self):
        return self

    async def __aexit__(self, exc_type, exc_val, exc_tb):
        await self.stop()

    async def handle_connection(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        stream = FrameStream(reader, writer, self.max_frame_size)
        self._streams.add(stream)
        session = None
        try:
            hello = await receive_hello(stream, self.handshake_timeout)
            session, cipher = await self.complete_handshake(stream, hello)
            await self._message_loop(stream, session, cipher)
        except Exception as e:
            report_connection_end(self.name, e)
        finally:
            if session is not None:
                self.end_session(session)
            self._streams.discard(stream)
            await stream.close()

    async def complete_handshake(self, stream: FrameStream, hello: Frame) -> Tuple[AttestationSession, SessionCipher]:
        """Verify the client quote carried by HELLO, answer with our own and derive the session key"""
        self.stats.connections += 1
        try:
            client_quote = AttestationQuote.decode(hello.body)
            self.verifier.verify(client_quote, CLIENT_ROLES)
        except (AttestationFailed, ProtocolError) as e:
            self.stats.attestation_failures += 1
            await send_plain_error(stream, e.wire_code, str(e))
            raise

        ephemeral, own_quote = await self.identity.new_quote()
        session_id = new_uuid()
        ack = encode_hello_ack(session_id, own_quote)
        await stream.send(MessageType.HELLO_ACK, ack)

        shared = ephemeral.exchange(X25519PublicKey.from_public_bytes(client_quote.dh_public))
        now = time.time()
        session = AttestationSession(
            session_id=session_id,
            peer_measurement=client_quote.measurement,
            peer_role=client_quote.role,
            session_key=derive_session_key(shared, hello.body, ack),
            established_at=now,
            last_used=now,
        )
        self.sessions[session_id] = session
        self.stats.attestations += 1
        self.stats.active_sessions = len(self.sessions)
        logger.info(f"🔐 {self.name}: attested {client_quote.role.name} "
                    f"{hex_preview(client_quote.measurement)} session {session_id}")
        return session, SessionCipher(session.session_key, is_client=False)

    def end_session(self, session: AttestationSession):
        self.sessions.pop(session.session_id, None)
        self.stats.active_sessions = len(self.sessions)

    async def expire_session(self, stream: FrameStream, session: AttestationSession, cipher: SessionCipher):
        self.stats.expired_sessions += 1
        logger.info(f"{self.name}: session {session.session_id} expired after {self.idle_timeout}s idle")
        await self._send_sealed_error(stream, cipher, ErrorCode.SESSION_EXPIRED, "session expired")

    async def _message_loop(self, stream: FrameStream, session: AttestationSession, cipher: SessionCipher):
        first = True
        while True:
            frame = await next_frame(stream, self.idle_timeout)
            if frame is None:
                await self.expire_session(stream, session, cipher)
                return
            if not await self.serve_frame(stream, session, cipher, frame, first):
                return
            first = False

    async def serve_frame(self, stream: FrameStream, session: AttestationSession, cipher: SessionCipher,
                          frame: Frame, first: bool) -> bool:
        """Answer one sealed request; False once the peer has ended the session"""
        try:
            body = cipher.open(frame.msg_type, frame.body)
        except (FrameAuthenticationError, ReplayDetected) as e:
            code = ErrorCode.REPLAY_DETECTED if first else ErrorCode.PROTOCOL_ERROR
            # the peer may not hold this session key, so the error goes out in plaintext
            await send_plain_error(stream, code, str(e))
            if first:
                raise ReplayDetected(f"first sealed frame rejected: {e}") from e
            raise
        session.touch()

        if frame.msg_type is MessageType.ERROR:
            return False
        try:
            if frame.msg_type is MessageType.KEY_FETCH:
                await self._handle_fetch(stream, cipher, decode_key_fetch(body))
            elif frame.msg_type is MessageType.KEY_PUSH:
                await self._handle_push(stream, cipher, session, *decode_key_push(body))
            else:
                raise ProtocolError(f"unexpected {frame.msg_type.name} in session")
        except ProtocolError as e:
            await self._send_sealed_error(stream, cipher, ErrorCode.PROTOCOL_ERROR, str(e))
            raise
        return True

    async def _send_sealed(self, stream: FrameStream, cipher: SessionCipher, msg_type: MessageType, body: bytes):
        await stream.send(msg_type, cipher.seal(msg_type, body))

    async def _send_sealed_error(self, stream: FrameStream, cipher: SessionCipher, code: ErrorCode, message: str):
        try:
            await self._send_sealed(stream, cipher, MessageType.ERROR, encode_error(code, message))
        except ChannelError:
            pass

    async def _handle_fetch(self, stream: FrameStream, cipher: SessionCipher, data_id: uuid.UUID):
        record = await self.key_table.get(data_id)
        if record is None:
            self.stats.fetch_misses += 1
            await self._send_sealed_error(stream, cipher, ErrorCode.KEY_NOT_FOUND, f"no key for {data_id}")
            return
        self.stats.fetches += 1
        await self._send_sealed(stream, cipher, MessageType.KEY_RESP,
                                encode_key_resp(data_id, record.custodian_id or uuid.UUID(int=0), record.data_key))

    async def _handle_push(self, stream: FrameStream, cipher: SessionCipher, session: AttestationSession,
                           data_id: uuid.UUID, custodian_id: uuid.UUID, data_key: bytes, signature: bytes):
        try:
            record = await self.store_pushed_key(session, data_id, custodian_id, data_key, signature)
        except DelegatorError as e:
            self.stats.push_rejections += 1
            logger.info(f"❌ {self.name}: push for {data_id} rejected: [{e.code}] {e}")
            await self._send_sealed_error(stream, cipher, e.wire_code, str(e))
            return
        self.stats.pushes += 1
        logger.info(f"✅ {self.name}: stored key for {data_id} ({record.origin.value})")
        await self._send_sealed(stream, cipher, MessageType.PUSH_ACK, encode_push_ack(data_id))

    async def store_pushed_key(self, session: AttestationSession, data_id: uuid.UUID, custodian_id: uuid.UUID,
                               data_key: bytes, signature: bytes) -> KeyRecord:
        """Apply the custodian-signature and middleware-provisioning rules to one push"""
        if not data_key or len(data_key) > MAX_KEY_LENGTH:
            raise ProtocolError(f"key of {len(data_key)} bytes is not acceptable")

        if signature:
            public_key = self.custodians.public_key_of(custodian_id)
            if public_key is None or not verify_push_signature(public_key, data_id, data_key, signature):
                raise NotCustodian(f"signature does not verify for custodian {custodian_id}")
            origin = KeyOrigin.CUSTODIAN_PROVISIONED
        else:
            if session.peer_role is not Role.CONSUMER_MIDDLEWARE or not self.accept_middleware_provisioning:
                raise NotCustodian("unsigned pushes are accepted only from attested consumer middleware")
            origin = KeyOrigin.MIDDLEWARE_DERIVED

        candidate = KeyRecord(data_id, bytes(data_key), origin, time.time(), custodian_id)
        existing = await self.key_table.get(data_id)
        if existing is None:
            existing = await self.key_table.put_if_absent(candidate)
        if existing.same_binding(candidate):
            return existing
        if existing.custodian_id != custodian_id:
            raise NotCustodian(f"{data_id} is held for another custodian")
        raise DuplicateConflict(f"{data_id} is already bound to a different key")
