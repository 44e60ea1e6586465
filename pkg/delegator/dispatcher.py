# delegator/dispatcher.py
"""
First-idle assignment of requests to delegator instances.

FirstIdleAssigner is plain bookkeeping shared by the TCP front and the
scalability simulator: a request goes to the lowest-numbered idle instance,
otherwise it waits in a FIFO queue and is handed the next released instance.
"""
import asyncio
import logging
from collections import deque
from contextlib import asynccontextmanager
from typing import Any, AsyncIterator, Deque, List, Optional, Set, Tuple

from delegator.errors import BindError
from delegator.server import KeyDelegatorServer, next_frame, receive_hello, report_connection_end
from delegator.wire_protocol import FrameStream

logger = logging.getLogger(__name__)


class FirstIdleAssigner:
    def __init__(self, instances: int):
        if instances < 1:
            raise ValueError("at least one instance is required")
        self._busy: List[bool] = [False] * instances
        self._waiting: Deque[Any] = deque()

    @property
    def instances(self) -> int:
        return len(self._busy)

    def idle_count(self) -> int:
        return self._busy.count(False)

    def queue_length(self) -> int:
        return len(self._waiting)

    def is_busy(self, index: int) -> bool:
        return self._busy[index]

    def acquire(self, request: Any) -> Optional[int]:
        """Index of the instance now serving request, or None if it was queued"""
        for index, busy in enumerate(self._busy):
            if not busy:
                self._busy[index] = True
                return index
        self._waiting.append(request)
        return None

    def release(self, index: int) -> Optional[Tuple[Any, int]]:
        """Free an instance; returns (request, index) if a queued request takes it over"""
        if not self._busy[index]:
            raise ValueError(f"instance {index} is not busy")
        if self._waiting:
            return self._waiting.popleft(), index
        self._busy[index] = False
        return None


class LoadBalancingFront:
    """TCP front handing each handshake and each sealed request to the first idle delegator instance.

    The front owns the client connection and its session, so an attested
    client that is idle between requests holds no instance.
    """

    def __init__(self, instances: List[KeyDelegatorServer]):
        self.instances = instances
        self.assigner = FirstIdleAssigner(len(instances))
        self._server: Optional[asyncio.AbstractServer] = None
        self._streams: Set[FrameStream] = set()
        self.host = None
        self.port = None

    async def start(self, host: str, port: int) -> Tuple[str, int]:
        try:
            self._server = await asyncio.start_server(self._handle_connection, host, port)
        except OSError as e:
            raise BindError(f"cannot bind load-balancing front to {host}:{port}: {e}") from e
        self.host, self.port = self._server.sockets[0].getsockname()[:2]
        logger.info(f"✅ Load-balancing front on {self.host}:{self.port} over {len(self.instances)} delegators")
        return self.host, self.port

    async def _acquire(self) -> int:
        waiter = asyncio.get_running_loop().create_future()
        index = self.assigner.acquire(waiter)
        if index is not None:
            return index
        logger.debug(f"All delegators busy, {self.assigner.queue_length()} requests queued")
        try:
            return await waiter
        except asyncio.CancelledError:
            # handed an instance just before being cancelled
            if waiter.done() and not waiter.cancelled():
                self._release(waiter.result())
            raise

    def _release(self, index: int):
        handed = self.assigner.release(index)
        if handed is not None:
            waiter, index = handed
            if waiter.cancelled():
                self._release(index)
            else:
                waiter.set_result(index)

    @asynccontextmanager
    async def _claim(self) -> AsyncIterator[KeyDelegatorServer]:
        index = await self._acquire()
        try:
            yield self.instances[index]
        finally:
            self._release(index)

    async def _handle_connection(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        settings = self.instances[0]
        stream = FrameStream(reader, writer, settings.max_frame_size)
        self._streams.add(stream)
        attested_by = session = None
        try:
            hello = await receive_hello(stream, settings.handshake_timeout)
            async with self._claim() as instance:
                session, cipher = await instance.complete_handshake(stream, hello)
                attested_by = instance

            first = True
            while True:
                frame = await next_frame(stream, settings.idle_timeout)
                if frame is None:
                    await attested_by.expire_session(stream, session, cipher)
                    return
                async with self._claim() as instance:
                    if not await instance.serve_frame(stream, session, cipher, frame, first):
                        return
                first = False
        except Exception as e:
            report_connection_end("front", e)
        finally:
            if session is not None:
                attested_by.end_session(session)
            self._streams.discard(stream)
            await stream.close()

    async def stop(self):
        if self._server is not None:
            self._server.close()
        for stream in list(self._streams):
            await stream.close()
        if self._server is not None:
            await self._server.wait_closed()
            self._server = None
