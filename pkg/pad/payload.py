# pad/payload.py
"""
Plaintext payload of a PAD and its canonical encoding.

    raw_data      u64 length + bytes
    policy_count  u16, then per policy: u32 length + canonical policy bytes
    attr_count    u16, then per attribute:
                  name (u16 length + UTF-8) | type tag u16 | value

Attribute values: UINT64 8 bytes, BYTES u32 length + bytes,
STRING u32 length + UTF-8, UUID 16 bytes.
"""
import base64
import logging
import uuid
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, Field, ValidationError, model_validator

from pad.errors import MalformedPayload, PayloadEncodingError
from policy.errors import PolicyError
from policy.model import Policy, canonical_encode, decode_policy
from utils.binary_codec import ByteReader, ByteWriter, DecodeError
from utils.common_utils import coerce_uuid

logger = logging.getLogger(__name__)

DATA_COUNT_ATTRIBUTE = "data_count"


class AttributeType(IntEnum):
    UINT64 = 1
    BYTES = 2
    STRING = 3
    UUID = 4


AttributeValue = Union[int, bytes, str, uuid.UUID]


@dataclass(frozen=True)
class DataAttribute:
    """A typed fact about the data, readable by policy engines"""
    attribute_name: str
    data_type_ref: AttributeType
    attribute_value: AttributeValue

    def __post_init__(self):
        try:
            kind = AttributeType(self.data_type_ref)
        except ValueError as e:
            raise PayloadEncodingError(f"unknown attribute type {self.data_type_ref!r}") from e
        object.__setattr__(self, "data_type_ref", kind)
        value = self.attribute_value
        if kind is AttributeType.UINT64:
            ok = isinstance(value, int) and not isinstance(value, bool) and 0 <= value < 2 ** 64
        elif kind is AttributeType.BYTES:
            ok = isinstance(value, (bytes, bytearray))
            if ok:
                object.__setattr__(self, "attribute_value", bytes(value))
        elif kind is AttributeType.STRING:
            ok = isinstance(value, str)
        else:
            ok = isinstance(value, uuid.UUID)
        if not ok:
            raise PayloadEncodingError(
                f"attribute {self.attribute_name!r}: value {value!r} does not match type {kind.name}")

    @classmethod
    def uint64(cls, name: str, value: int) -> "DataAttribute":
        return cls(name, AttributeType.UINT64, value)

    @classmethod
    def string(cls, name: str, value: str) -> "DataAttribute":
        return cls(name, AttributeType.STRING, value)

    def encode(self, writer: ByteWriter):
        writer.str16(self.attribute_name).u16(int(self.data_type_ref))
        kind = self.data_type_ref
        if kind is AttributeType.UINT64:
            writer.u64(self.attribute_value)
        elif kind is AttributeType.BYTES:
            writer.bytes32(self.attribute_value)
        elif kind is AttributeType.STRING:
            writer.bytes32(self.attribute_value.encode("utf-8"))
        else:
            writer.uuid(self.attribute_value)

    @classmethod
    def decode(cls, reader: ByteReader) -> "DataAttribute":
        name = reader.str16()
        tag = reader.u16()
        try:
            kind = AttributeType(tag)
        except ValueError as e:
            raise DecodeError(f"unknown attribute type tag {tag}") from e
        if kind is AttributeType.UINT64:
            value = reader.u64()
        elif kind is AttributeType.BYTES:
            value = reader.bytes32()
        elif kind is AttributeType.STRING:
            value = reader.str32()
        else:
            value = reader.uuid()
        return cls(name, kind, value)

    def to_dict(self) -> Dict[str, Any]:
        value = self.attribute_value
        if self.data_type_ref is AttributeType.BYTES:
            value = base64.b64encode(value).decode("ascii")
        elif self.data_type_ref is AttributeType.UUID:
            value = str(value)
        return {"name": self.attribute_name, "type": self.data_type_ref.name.lower(), "value": value}


@dataclass(frozen=True)
class PlaintextPayload:
    """Raw data plus the policies and attributes sealed with it"""
    raw_data: bytes
    policies: Tuple[Policy, ...]
    attributes: Tuple[DataAttribute, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "raw_data", bytes(self.raw_data))
        object.__setattr__(self, "policies", tuple(self.policies))
        object.__setattr__(self, "attributes", tuple(self.attributes))

    def attribute(self, name: str) -> Optional[DataAttribute]:
        """First attribute with the given name"""
        for attribute in self.attributes:
            if attribute.attribute_name == name:
                return attribute
        return None

    def policy_langs(self) -> List[uuid.UUID]:
        return [p.policy_lang_id for p in self.policies]


def encode_payload(payload: PlaintextPayload) -> bytes:
    """Canonical bytes of a payload; requires at least one policy"""
    if not payload.policies:
        raise PayloadEncodingError("a PAD payload must carry at least one policy")
    if len(payload.policies) > 0xFFFF or len(payload.attributes) > 0xFFFF:
        raise PayloadEncodingError("too many policies or attributes")
    writer = ByteWriter().bytes64(payload.raw_data).u16(len(payload.policies))
    for policy in payload.policies:
        writer.bytes32(canonical_encode(policy))
    writer.u16(len(payload.attributes))
    try:
        for attribute in payload.attributes:
            attribute.encode(writer)
    except (ValueError, OverflowError) as e:
        raise PayloadEncodingError(f"attribute does not encode: {e}") from e
    return writer.getvalue()


def decode_payload(data: bytes) -> PlaintextPayload:
    """Strict inverse of encode_payload"""
    reader = ByteReader(data)
    try:
        raw_data = reader.bytes64()
        policies = tuple(decode_policy(reader.bytes32()) for _ in range(reader.u16()))
        attributes = tuple(DataAttribute.decode(reader) for _ in range(reader.u16()))
        reader.expect_end()
    except (DecodeError, PolicyError, PayloadEncodingError) as e:
        raise MalformedPayload(f"payload does not decode: {e}") from e
    if not policies:
        raise MalformedPayload("payload carries no policy")
    return PlaintextPayload(raw_data, policies, attributes)


class AttributeDescription(BaseModel):
    name: str = Field(min_length=1)
    type: str = "uint64"
    value: Any

    def to_attribute(self) -> DataAttribute:
        try:
            kind = AttributeType[self.type.upper()]
        except KeyError as e:
            raise PayloadEncodingError(f"unknown attribute type {self.type!r}") from e
        value = self.value
        if kind is AttributeType.BYTES:
            value = base64.b64decode(value)
        elif kind is AttributeType.UUID:
            value = coerce_uuid(value)
        return DataAttribute(self.name, kind, value)


class PayloadDescription(BaseModel):
    """JSON authoring form of a payload plus the metadata a packer needs"""
    custodian_id: uuid.UUID
    delegator_uri: str
    data_id: Optional[uuid.UUID] = None
    crypto_suite: Optional[int] = None
    raw_data_text: Optional[str] = None
    raw_data_base64: Optional[str] = None
    raw_data_file: Optional[str] = None
    attributes: List[AttributeDescription] = Field(default_factory=list)

    @model_validator(mode="after")
    def _one_raw_data_source(self):
        sources = [s for s in (self.raw_data_text, self.raw_data_base64, self.raw_data_file) if s is not None]
        if len(sources) != 1:
            raise ValueError("exactly one of raw_data_text, raw_data_base64, raw_data_file is required")
        return self

    def raw_data(self, base_dir: Path = None) -> bytes:
        if self.raw_data_text is not None:
            return self.raw_data_text.encode("utf-8")
        if self.raw_data_base64 is not None:
            return base64.b64decode(self.raw_data_base64)
        path = Path(self.raw_data_file)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return path.read_bytes()

    def to_payload(self, policies: Sequence[Policy], base_dir: Path = None) -> PlaintextPayload:
        return PlaintextPayload(
            raw_data=self.raw_data(base_dir),
            policies=tuple(policies),
            attributes=tuple(a.to_attribute() for a in self.attributes),
        )


def load_payload_description(data: Dict[str, Any]) -> PayloadDescription:
    try:
        return PayloadDescription.model_validate(data)
    except ValidationError as e:
        raise PayloadEncodingError(f"invalid payload description: {e}") from e
