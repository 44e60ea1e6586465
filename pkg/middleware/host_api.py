# middleware/host_api.py
"""
The capability surface handed to a consumer program.

A program receives a HostApi and nothing else: it can create and fill
datasets, run the policy check for the program it was started as, read
entries of a checked dataset, propose outputs and read a monotonic clock.
"""
import time
from typing import Callable, List, Set

from middleware.dataset import EntryView
from middleware.errors import UnknownDataset
from policy.engines.base import OutputProposal
from policy.model import ProgramManifest


class ConsumerSession:
    """Middleware-side state of one running consumer program"""

    def __init__(self, middleware, program: ProgramManifest, clock: Callable[[], float] = None):
        self.middleware = middleware
        self.program = program
        self.clock = clock or time.monotonic
        self.handles: Set[int] = set()
        self.outputs: List[bytes] = []

    def owned(self, handle: int) -> int:
        if handle not in self.handles:
            raise UnknownDataset(f"dataset {handle} does not belong to this program")
        return handle


class HostApi:
    __slots__ = ("__session",)

    def __init__(self, session: ConsumerSession):
        self.__session = session

    def dataset_new(self) -> int:
        session = self.__session
        handle = session.middleware.dataset_new()
        session.handles.add(handle)
        return handle

    async def dataset_add(self, handle: int, pad_bytes: bytes) -> None:
        session = self.__session
        await session.middleware.dataset_add(session.owned(handle), bytes(pad_bytes))

    def dataset_check(self, handle: int) -> bool:
        session = self.__session
        return session.middleware.dataset_check(session.owned(handle), session.program)

    def dataset_access(self, handle: int, index: int) -> EntryView:
        session = self.__session
        return session.middleware.dataset_access(session.owned(handle), index)

    async def propose_output(self, handle: int, proposal: OutputProposal) -> bytes:
        session = self.__session
        pad_bytes = await session.middleware.propose_output(session.owned(handle), proposal)
        session.outputs.append(pad_bytes)
        return pad_bytes

    def monotonic_clock(self) -> float:
        return self.__session.clock()


HOST_API_CALLS = frozenset({
    "dataset_new",
    "dataset_add",
    "dataset_check",
    "dataset_access",
    "propose_output",
    "monotonic_clock",
})
