import random
import struct

import pytest

from pad.codec import decrypt_payload, open_pad, pack_pad, parse_metadata
from pad.crypto_suite import SUITE_AES_256_GCM, SUITE_CHACHA20_POLY1305, available_suites, get_suite
from pad.errors import (
    BadMagic,
    IntegrityFailure,
    KeyLengthMismatch,
    PadError,
    PayloadEncodingError,
    TrailingBytes,
    TruncatedInput,
    UnknownSuite,
    UnsupportedVersion,
)
from pad.metadata import PAD_MAGIC, PadMetadata
from pad.payload import DataAttribute, PlaintextPayload
from policy.model import TRAINING_POLICY_LANG_ID, Policy, ShareCapRule
from tests.conftest import TEST_URI, sealed_pad

POLICY = Policy(TRAINING_POLICY_LANG_ID, input_constraints=(ShareCapRule(50),))


@pytest.mark.parametrize("suite", [SUITE_AES_256_GCM, SUITE_CHACHA20_POLY1305])
def test_pack_then_open_restores_payload(suite):
    attributes = (DataAttribute.uint64("data_count", 3), DataAttribute.string("hospital", "A"))
    pad_bytes, key, metadata = sealed_pad([POLICY], raw_data=b"a,b\n1,2\n", suite=suite)
    opened = open_pad(pad_bytes, key)

    assert opened.metadata.data_id == metadata.data_id
    assert opened.metadata.crypto_suite == suite
    assert opened.payload.raw_data == b"a,b\n1,2\n"
    assert opened.payload.policies == (POLICY,)

    payload = PlaintextPayload(b"x" * 1000, (POLICY,), attributes)
    again = pack_pad(payload, metadata, key)
    assert decrypt_payload(again, key) == payload


def test_random_payloads_survive_sealing():
    rng = random.Random(5)
    suite = get_suite(SUITE_AES_256_GCM)
    for size in (0, 1, 15, 16, 17, 4096, 70_000):
        raw = bytes(rng.getrandbits(8) for _ in range(size))
        pad_bytes, key, _ = sealed_pad([POLICY], raw_data=raw)
        assert decrypt_payload(pad_bytes, key).raw_data == raw
        assert len(pad_bytes) > suite.tag_length + len(raw)


def test_metadata_needs_no_key():
    pad_bytes, _, metadata = sealed_pad([POLICY], raw_data=b"secret rows")
    parsed = parse_metadata(pad_bytes)
    assert parsed.data_id == metadata.data_id
    assert parsed.custodian_id == metadata.custodian_id
    assert parsed.key_delegator_uri == TEST_URI
    assert pad_bytes.startswith(PAD_MAGIC)
    assert b"secret rows" not in pad_bytes


def test_every_byte_flip_is_detected():
    pad_bytes, key, _ = sealed_pad([POLICY], raw_data=b"0123456789" * 4)
    rng = random.Random(11)
    positions = set(range(0, len(pad_bytes), 3)) | {len(pad_bytes) - 1}
    for position in sorted(positions):
        tampered = bytearray(pad_bytes)
        tampered[position] ^= 1 << rng.randrange(8)
        with pytest.raises(PadError):
            decrypt_payload(bytes(tampered), key)


def test_randomized_payloads_round_trip_exactly():
    rng = random.Random(2023)
    for i in range(10_000):
        raw = rng.randbytes(rng.randrange(0, 256))
        attributes = (DataAttribute.uint64("data_count", rng.getrandbits(64)),
                      DataAttribute.string("tag", str(rng.random())))[:rng.randrange(3)]
        suite = SUITE_CHACHA20_POLY1305 if i % 2 else SUITE_AES_256_GCM
        payload = PlaintextPayload(raw, (POLICY,), attributes)
        _, key, metadata = sealed_pad([POLICY], suite=suite)
        assert decrypt_payload(pack_pad(payload, metadata, key), key) == payload


def test_random_single_byte_mutations_never_decrypt():
    pad_bytes, key, _ = sealed_pad([POLICY], raw_data=b"rows" * 16)
    rng = random.Random(17)
    for _ in range(10_000):
        tampered = bytearray(pad_bytes)
        position = rng.randrange(len(tampered))
        tampered[position] = (tampered[position] + rng.randrange(1, 256)) % 256
        with pytest.raises(PadError):
            decrypt_payload(bytes(tampered), key)


def test_wrong_key_fails_integrity():
    pad_bytes, key, _ = sealed_pad([POLICY])
    wrong = bytes(b ^ 0xFF for b in key)
    with pytest.raises(IntegrityFailure):
        decrypt_payload(pad_bytes, wrong)


def test_key_of_wrong_length_is_rejected():
    pad_bytes, key, _ = sealed_pad([POLICY])
    with pytest.raises(KeyLengthMismatch):
        decrypt_payload(pad_bytes, key[:16])


def test_truncated_and_trailing_inputs():
    pad_bytes, key, _ = sealed_pad([POLICY])
    with pytest.raises(TruncatedInput):
        parse_metadata(pad_bytes[:3])
    with pytest.raises(TruncatedInput):
        parse_metadata(pad_bytes[:-1])
    with pytest.raises(TrailingBytes):
        parse_metadata(pad_bytes + b"\x00")


def test_bad_magic_version_and_suite():
    pad_bytes, _, _ = sealed_pad([POLICY])
    with pytest.raises(BadMagic):
        parse_metadata(b"PAD2" + pad_bytes[4:])
    with pytest.raises(UnsupportedVersion):
        parse_metadata(pad_bytes[:4] + struct.pack("<H", 99) + pad_bytes[6:])
    suite_offset = 4 + 2 + 16 + 16
    with pytest.raises(UnknownSuite):
        parse_metadata(pad_bytes[:suite_offset] + struct.pack("<H", 0x7777) + pad_bytes[suite_offset + 2:])


def test_payload_without_policy_is_refused():
    metadata = PadMetadata(data_id="00000000-0000-0000-0000-000000000001",
                           custodian_id="00000000-0000-0000-0000-000000000002",
                           crypto_suite=SUITE_AES_256_GCM, key_delegator_uri=TEST_URI)
    with pytest.raises(PayloadEncodingError):
        pack_pad(PlaintextPayload(b"rows", ()), metadata, bytes(32))


def test_nonce_is_fresh_per_pack():
    pad_bytes, key, metadata = sealed_pad([POLICY])
    payload = decrypt_payload(pad_bytes, key)
    assert pack_pad(payload, metadata, key) != pack_pad(payload, metadata, key)


def test_both_suites_are_registered():
    ids = {suite.suite_id for suite in available_suites()}
    assert {SUITE_AES_256_GCM, SUITE_CHACHA20_POLY1305} <= ids
