# utils/binary_codec.py - Little-endian fixed-width field codec shared by PAD, policy and wire formats
import struct
import uuid

_U8 = struct.Struct("<B")
_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


class DecodeError(ValueError):
    """Input ended early or contained an invalid field"""


class ByteWriter:
    """Append-only little-endian writer"""

    def __init__(self):
        self._parts = []

    def u8(self, value: int) -> "ByteWriter":
        self._parts.append(_U8.pack(value))
        return self

    def u16(self, value: int) -> "ByteWriter":
        self._parts.append(_U16.pack(value))
        return self

    def u32(self, value: int) -> "ByteWriter":
        self._parts.append(_U32.pack(value))
        return self

    def u64(self, value: int) -> "ByteWriter":
        self._parts.append(_U64.pack(value))
        return self

    def raw(self, data: bytes) -> "ByteWriter":
        self._parts.append(bytes(data))
        return self

    def uuid(self, value: uuid.UUID) -> "ByteWriter":
        self._parts.append(value.bytes)
        return self

    def bytes16(self, data: bytes) -> "ByteWriter":
        """u16 length prefix + bytes"""
        if len(data) > 0xFFFF:
            raise ValueError(f"field of {len(data)} bytes exceeds u16 length prefix")
        return self.u16(len(data)).raw(data)

    def bytes32(self, data: bytes) -> "ByteWriter":
        """u32 length prefix + bytes"""
        if len(data) > 0xFFFFFFFF:
            raise ValueError(f"field of {len(data)} bytes exceeds u32 length prefix")
        return self.u32(len(data)).raw(data)

    def bytes64(self, data: bytes) -> "ByteWriter":
        """u64 length prefix + bytes"""
        return self.u64(len(data)).raw(data)

    def str16(self, text: str) -> "ByteWriter":
        return self.bytes16(text.encode("utf-8"))

    def getvalue(self) -> bytes:
        return b"".join(self._parts)


class ByteReader:
    """Bounds-checked little-endian reader over an immutable buffer"""

    def __init__(self, data: bytes, offset: int = 0):
        self._data = memoryview(bytes(data))
        self._offset = offset

    @property
    def offset(self) -> int:
        return self._offset

    def remaining(self) -> int:
        return len(self._data) - self._offset

    def _take(self, count: int) -> bytes:
        if count < 0 or self._offset + count > len(self._data):
            raise DecodeError(f"need {count} bytes at offset {self._offset}, only {self.remaining()} left")
        chunk = self._data[self._offset:self._offset + count].tobytes()
        self._offset += count
        return chunk

    def u8(self) -> int:
        return _U8.unpack(self._take(1))[0]

    def u16(self) -> int:
        return _U16.unpack(self._take(2))[0]

    def u32(self) -> int:
        return _U32.unpack(self._take(4))[0]

    def u64(self) -> int:
        return _U64.unpack(self._take(8))[0]

    def raw(self, count: int) -> bytes:
        return self._take(count)

    def uuid(self) -> uuid.UUID:
        return uuid.UUID(bytes=self._take(16))

    def bytes16(self) -> bytes:
        return self._take(self.u16())

    def bytes32(self) -> bytes:
        return self._take(self.u32())

    def bytes64(self) -> bytes:
        return self._take(self.u64())

    def str16(self) -> str:
        data = self.bytes16()
        try:
            return data.decode("utf-8")
        except UnicodeDecodeError as e:
            raise DecodeError(f"invalid UTF-8 string: {e}") from e

    def str32(self) -> str:
        data = self.bytes32()
        try:
            return data.decode("utf-8")
        except UnicodeDecodeError as e:
            raise DecodeError(f"invalid UTF-8 string: {e}") from e

    def expect_end(self):
        if self.remaining():
            raise DecodeError(f"{self.remaining()} unexpected trailing bytes")
