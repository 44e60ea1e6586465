import hashlib
import os
import uuid
from typing import Sequence

import pytest
import pytest_asyncio

from pad.codec import DecryptedPad, pack_pad
from pad.crypto_suite import SUITE_AES_256_GCM, get_suite
from pad.metadata import PadMetadata
from pad.payload import DATA_COUNT_ATTRIBUTE, DataAttribute, PlaintextPayload
from policy.model import Policy, ProgramKind, ProgramManifest
from scenario.deployment import LoopbackDeployment

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")
TEST_URI = "127.0.0.1:7400"


def fixture_path(name: str) -> str:
    return os.path.join(FIXTURES, name)


def program(kind: ProgramKind = ProgramKind.TRAINING, owner: uuid.UUID = None, artifact: bytes = b"trainer-v1"):
    return ProgramManifest(hashlib.sha256(artifact).digest(), owner or uuid.uuid4(), kind)


def sealed_pad(policies: Sequence[Policy], raw_data: bytes = b"rows", custodian_id: uuid.UUID = None,
               count: int = None, suite: int = SUITE_AES_256_GCM, uri: str = TEST_URI, data_id: uuid.UUID = None):
    """(pad_bytes, data_key, metadata) sealed offline"""
    attributes = () if count is None else (DataAttribute.uint64(DATA_COUNT_ATTRIBUTE, count),)
    key = get_suite(suite).generate_key()
    metadata = PadMetadata(data_id or uuid.uuid4(), custodian_id or uuid.uuid4(), suite, uri)
    pad_bytes = pack_pad(PlaintextPayload(raw_data, tuple(policies), attributes), metadata, key)
    return pad_bytes, key, metadata


def decrypted(policies: Sequence[Policy], custodian_id: uuid.UUID = None, count: int = None,
              raw_data: bytes = b"rows") -> DecryptedPad:
    """A DecryptedPad built without going through the cipher"""
    attributes = () if count is None else (DataAttribute.uint64(DATA_COUNT_ATTRIBUTE, count),)
    metadata = PadMetadata(uuid.uuid4(), custodian_id or uuid.uuid4(), SUITE_AES_256_GCM, TEST_URI)
    return DecryptedPad(metadata, PlaintextPayload(raw_data, tuple(policies), attributes))


@pytest_asyncio.fixture
async def deployment():
    async with LoopbackDeployment(delegators=1) as running:
        yield running


@pytest_asyncio.fixture
async def two_delegators():
    async with LoopbackDeployment(delegators=2) as running:
        yield running


@pytest.fixture
def wire_capture():
    frames = []

    def tap(direction: str, data: bytes):
        frames.append((direction, bytes(data)))

    tap.frames = frames
    return tap
