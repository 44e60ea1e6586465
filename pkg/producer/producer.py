# producer/producer.py
"""
Data producer: seals raw data under custodian-chosen policies and provisions
the fresh data key at the custodian's key delegator.
"""
import logging
import uuid
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

from config.config import DEFAULT_CRYPTO_SUITE
from delegator.custodian import CustodianCredential
from delegator.errors import DelegatorError
from middleware.secret_store import SecretStore
from pad.codec import pack_pad
from pad.crypto_suite import get_suite
from pad.errors import PadError
from pad.metadata import PadMetadata
from pad.payload import DataAttribute, PlaintextPayload
from policy.errors import PolicyError
from policy.model import Policy
from utils.common_utils import new_uuid, parse_host_port

logger = logging.getLogger(__name__)


class ProducerError(Exception):
    code = "PRODUCER_ERROR"


class PackError(ProducerError):
    code = "PACK_ERROR"


class DelegatorUnreachable(ProducerError):
    """The key could not be provisioned; the PAD is withheld"""
    code = "DELEGATOR_UNREACHABLE"


@dataclass(frozen=True)
class ProducerConfig:
    credential: CustodianCredential = field(repr=False)
    delegator_uri: str
    policy_templates: Tuple[Policy, ...]
    crypto_suite: int = DEFAULT_CRYPTO_SUITE

    def __post_init__(self):
        object.__setattr__(self, "policy_templates", tuple(self.policy_templates))
        try:
            get_suite(self.crypto_suite)
            parse_host_port(self.delegator_uri)
        except (PadError, ValueError) as e:
            raise PackError(f"invalid producer config: {e}") from e

    @property
    def custodian_id(self) -> uuid.UUID:
        return self.credential.custodian_id


class Producer:
    def __init__(self, secret_store: SecretStore):
        self.secret_store = secret_store
        self.produced = 0

    async def produce(self, raw_data: bytes, attributes: Sequence[DataAttribute],
                      config: ProducerConfig, data_id: Optional[uuid.UUID] = None) -> Tuple[bytes, uuid.UUID]:
        """Pack raw_data into a new PAD under a fresh key and push the key, signed, to the delegator"""
        if not config.policy_templates:
            raise PackError("a PAD needs at least one policy")

        suite = get_suite(config.crypto_suite)
        data_id = data_id or new_uuid()
        data_key = bytearray(suite.generate_key())
        try:
            try:
                payload = PlaintextPayload(raw_data, config.policy_templates, tuple(attributes))
                metadata = PadMetadata(data_id, config.custodian_id, suite.suite_id, config.delegator_uri)
                pad_bytes = pack_pad(payload, metadata, bytes(data_key))
            except (PadError, PolicyError) as e:
                raise PackError(f"cannot pack {data_id}: {e}") from e

            try:
                await self.secret_store.push_to_delegator(
                    data_id, bytes(data_key), config.credential, config.delegator_uri)
            except DelegatorError as e:
                raise DelegatorUnreachable(
                    f"key for {data_id} not provisioned at {config.delegator_uri}: [{e.code}] {e}") from e
        finally:
            # best-effort: only the custodian and its delegator keep the key
            data_key[:] = bytes(len(data_key))

        self.produced += 1
        logger.info(f"✅ Produced PAD {data_id} for custodian {config.custodian_id} ({len(pad_bytes)} bytes)")
        return pad_bytes, data_id
