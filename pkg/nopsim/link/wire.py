"""Byte framing of switch traffic on external links.

Every frame starts with a one-byte tag. DATA and HEADER carry a
little-endian 32-bit word; END and PAUSE are the bare tag. A message segment
on the wire is HEADER (destination global port) followed by DATA frames and
closed by END or PAUSE.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, List, Optional

from nopsim.isa.words import WORD_MASK
from nopsim.switch.tokens import Token, TokenKind

HANDSHAKE_MAGIC = 0x4B4E4C4E  # b"NLNK" little-endian
_WORD = struct.Struct("<I")
_HANDSHAKE = struct.Struct("<II")


class LinkProtocolError(ValueError):
    """A malformed stream; `frames` holds what decoded cleanly before the fault."""

    def __init__(self, message: str, frames: Optional[List[Frame]] = None) -> None:
        super().__init__(message)
        self.frames: List[Frame] = list(frames or [])


class FrameTag(IntEnum):
    DATA = 0x00
    END = 0x01
    PAUSE = 0x02
    HEADER = 0x03


_WITH_PAYLOAD = (FrameTag.DATA, FrameTag.HEADER)


@dataclass(frozen=True)
class Frame:
    tag: FrameTag
    value: Optional[int] = None

    @classmethod
    def header(cls, destination: int) -> "Frame":
        return cls(FrameTag.HEADER, destination & WORD_MASK)

    @classmethod
    def from_token(cls, token: Token) -> "Frame":
        if token.kind is TokenKind.DATA:
            return cls(FrameTag.DATA, token.value)
        if token.kind is TokenKind.END:
            return cls(FrameTag.END)
        return cls(FrameTag.PAUSE)

    def to_token(self) -> Token:
        if self.tag is FrameTag.DATA:
            return Token.data(self.value or 0)
        if self.tag is FrameTag.END:
            return Token.end()
        if self.tag is FrameTag.PAUSE:
            return Token.pause()
        raise LinkProtocolError("HEADER frames do not carry a token.")


def encode_frame(frame: Frame) -> bytes:
    if frame.tag in _WITH_PAYLOAD:
        return bytes([frame.tag]) + _WORD.pack((frame.value or 0) & WORD_MASK)
    return bytes([frame.tag])


def encode_frames(frames: Iterable[Frame]) -> bytes:
    return b"".join(encode_frame(frame) for frame in frames)


class FrameDecoder:
    """Incremental decoder; partial frames stay buffered until the rest arrives."""

    def __init__(self) -> None:
        self._buffer = bytearray()

    @property
    def pending_bytes(self) -> int:
        return len(self._buffer)

    def feed(self, data: bytes) -> List[Frame]:
        self._buffer.extend(data)
        frames: List[Frame] = []
        offset = 0
        while offset < len(self._buffer):
            raw_tag = self._buffer[offset]
            try:
                tag = FrameTag(raw_tag)
            except ValueError:
                del self._buffer[:offset]
                raise LinkProtocolError(f"Unknown frame tag 0x{raw_tag:02X}.", frames) from None
            if tag in _WITH_PAYLOAD:
                if offset + 1 + _WORD.size > len(self._buffer):
                    break
                (value,) = _WORD.unpack_from(self._buffer, offset + 1)
                frames.append(Frame(tag, value))
                offset += 1 + _WORD.size
            else:
                frames.append(Frame(tag))
                offset += 1
        del self._buffer[:offset]
        return frames


def encode_handshake(processor_id: int) -> bytes:
    return _HANDSHAKE.pack(HANDSHAKE_MAGIC, processor_id)


def decode_handshake(data: bytes) -> int:
    if len(data) != _HANDSHAKE.size:
        raise LinkProtocolError(f"Handshake must be {_HANDSHAKE.size} bytes, got {len(data)}.")
    magic, processor_id = _HANDSHAKE.unpack(data)
    if magic != HANDSHAKE_MAGIC:
        raise LinkProtocolError(f"Bad handshake magic 0x{magic:08X}.")
    return processor_id


HANDSHAKE_SIZE = _HANDSHAKE.size
