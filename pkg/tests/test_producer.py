import uuid

import pytest

from delegator.key_table import KeyOrigin
from pad.codec import open_pad, parse_metadata
from pad.crypto_suite import SUITE_CHACHA20_POLY1305
from pad.payload import DATA_COUNT_ATTRIBUTE, DataAttribute
from producer.producer import DelegatorUnreachable, PackError, ProducerConfig
from scenario.policies import training_data_policy

JOINT = uuid.uuid4()
TRAINER_HASH = bytes(range(32))


def config_for(deployment, uri=None, templates=None, **kwargs) -> ProducerConfig:
    if templates is None:
        templates = (training_data_policy(60, TRAINER_HASH, JOINT),)
    return ProducerConfig(deployment.custodian("A"), uri or deployment.uri_for(0), templates, **kwargs)


@pytest.mark.asyncio
async def test_produced_pad_opens_with_the_provisioned_key(deployment):
    producer = deployment.producer()
    attributes = (DataAttribute.uint64(DATA_COUNT_ATTRIBUTE, 3),)
    pad_bytes, data_id = await producer.produce(b"1,2\n3,4\n5,6", attributes, config_for(deployment))

    metadata = parse_metadata(pad_bytes)
    assert metadata.data_id == data_id
    assert metadata.custodian_id == deployment.custodian("A").custodian_id
    assert metadata.key_delegator_uri == deployment.uri_for(0)

    record = await deployment.key_table.get(data_id)
    assert record.origin is KeyOrigin.CUSTODIAN_PROVISIONED
    opened = open_pad(pad_bytes, record.data_key)
    assert opened.payload.raw_data == b"1,2\n3,4\n5,6"
    assert opened.payload.attribute(DATA_COUNT_ATTRIBUTE).attribute_value == 3
    assert producer.produced == 1


@pytest.mark.asyncio
async def test_chacha_suite_and_fresh_ids(deployment):
    producer = deployment.producer()
    config = config_for(deployment, crypto_suite=SUITE_CHACHA20_POLY1305)
    ids = set()
    for _ in range(5):
        pad_bytes, data_id = await producer.produce(b"same rows", (), config)
        assert parse_metadata(pad_bytes).crypto_suite == SUITE_CHACHA20_POLY1305
        ids.add(data_id)
    assert len(ids) == 5
    assert await deployment.key_table.count() == 5


@pytest.mark.asyncio
async def test_a_pad_needs_a_policy(deployment):
    with pytest.raises(PackError):
        await deployment.producer().produce(b"rows", (), config_for(deployment, templates=()))
    assert await deployment.key_table.count() == 0


def test_config_rejects_bad_suite_and_uri(deployment):
    with pytest.raises(PackError):
        config_for(deployment, crypto_suite=0x7777)
    with pytest.raises(PackError):
        config_for(deployment, uri="no-port-here")


@pytest.mark.asyncio
async def test_dead_delegator_withholds_the_pad(deployment):
    producer = deployment.producer()
    with pytest.raises(DelegatorUnreachable):
        await producer.produce(b"rows", (), config_for(deployment, uri="127.0.0.1:9"))
    assert producer.produced == 0
    assert await deployment.key_table.count() == 0
