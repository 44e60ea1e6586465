# middleware/consumer_runner.py
import logging
from dataclasses import dataclass, field
from typing import Any, Awaitable, Callable, List, Mapping, Sequence

from middleware.consumer_middleware import ConsumerMiddleware
from middleware.errors import ProgramMismatch, ProgramPanic
from middleware.host_api import ConsumerSession, HostApi
from policy.model import ProgramManifest
from utils.common_utils import hex_preview

logger = logging.getLogger(__name__)

ConsumerEntry = Callable[[HostApi, Sequence[bytes], Mapping[str, Any]], Awaitable[Any]]


@dataclass(frozen=True)
class ConsumerProgram:
    """A consumer entry point together with the artifact bytes its manifest was computed over"""
    manifest: ProgramManifest
    artifact: bytes
    entry: ConsumerEntry


@dataclass
class ConsumerExit:
    status: str
    result: Any = None
    outputs: List[bytes] = field(default_factory=list)


async def run_consumer(
        program: ConsumerProgram,
        middleware: ConsumerMiddleware,
        inputs: Sequence[bytes] = (),
        params: Mapping[str, Any] = None,
        clock: Callable[[], float] = None,
) -> ConsumerExit:
    """
    Run a consumer program with a HostApi as its only capability.

    Anything the program raises is contained as ProgramPanic; the
    middleware's delegator sessions are then closed.
    """
    if not program.manifest.matches(program.artifact):
        raise ProgramMismatch(f"artifact does not hash to {hex_preview(program.manifest.program_hash)}")

    session = ConsumerSession(middleware, program.manifest, clock)
    host = HostApi(session)
    logger.info(f"Starting {program.manifest.program_kind.value} program "
                f"{hex_preview(program.manifest.program_hash)} for owner {program.manifest.owner_id}")
    try:
        result = await program.entry(host, list(inputs), dict(params or {}))
    except Exception as e:
        logger.error(f"❌ Consumer program panicked: {type(e).__name__}: {e}")
        await middleware.close()
        raise ProgramPanic(f"{type(e).__name__}: {e}") from e
    finally:
        for handle in session.handles:
            middleware.discard(handle)

    logger.info(f"✅ Consumer program finished, {len(session.outputs)} outputs")
    return ConsumerExit("ok", result, list(session.outputs))
