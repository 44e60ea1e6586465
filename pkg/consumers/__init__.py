# consumers/__init__.py
"""
Stand-in consumer programs. A program's identity is the SHA-256 digest of its
artifact, which for these programs is the source file of the module.
"""
from pathlib import Path
from typing import Dict

from consumers import fine_tune, query, trainer
from middleware.consumer_runner import ConsumerProgram
from policy.model import ProgramKind, ProgramManifest

PROGRAMS: Dict[ProgramKind, object] = {
    ProgramKind.TRAINING: trainer,
    ProgramKind.QUERY: query,
    ProgramKind.FINE_TUNE: fine_tune,
}


def program_artifact(kind: ProgramKind) -> bytes:
    return Path(PROGRAMS[ProgramKind(kind)].__file__).read_bytes()


def load_program(kind: ProgramKind, owner_id, artifact: bytes = None) -> ConsumerProgram:
    """
    The registered program of a kind, run on behalf of owner_id.

    Passing artifact overrides the bytes the manifest is computed over,
    which is how a tampered build of the same entry point is modelled.
    """
    kind = ProgramKind(kind)
    artifact = program_artifact(kind) if artifact is None else bytes(artifact)
    manifest = ProgramManifest.from_artifact(artifact, owner_id, kind)
    return ConsumerProgram(manifest, artifact, PROGRAMS[kind].run)


def perturbed(artifact: bytes, index: int = 0) -> bytes:
    """Artifact with one byte flipped"""
    data = bytearray(artifact)
    data[index] ^= 0x01
    return bytes(data)
