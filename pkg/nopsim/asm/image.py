"""Init image and ROM file formats.

An init image is a sequence of little-endian words. The simulator skips the
first five; images written here fill them with the magic word `NOPI`, the
payload length in words, the start position and two zero words. The payload
is the start position followed by the code, exactly the message the boot
ROM expects.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import List, Sequence

from nopsim.cpu.memory import BOOT_ROM_WORDS
from nopsim.isa.words import WORD_MASK

IMAGE_MAGIC = int.from_bytes(b"NOPI", "little")
HEADER_WORDS = 5
WORD_BYTES = 4


class InitImageError(ValueError):
    pass


@dataclass(frozen=True)
class ImageHeader:
    magic: int
    length: int
    start: int

    @property
    def has_magic(self) -> bool:
        return self.magic == IMAGE_MAGIC


def pack_words(words: Sequence[int]) -> bytes:
    return struct.pack(f"<{len(words)}I", *(w & WORD_MASK for w in words))


def unpack_words(data: bytes) -> List[int]:
    if len(data) % WORD_BYTES:
        raise InitImageError(f"Image size {len(data)} is not a multiple of {WORD_BYTES} bytes.")
    return list(struct.unpack(f"<{len(data) // WORD_BYTES}I", data))


def build_image(code: Sequence[int], start: int) -> bytes:
    payload = [start, *code]
    header = [IMAGE_MAGIC, len(payload), start, 0, 0]
    return pack_words(header + payload)


def read_image(data: bytes) -> List[int]:
    """Words of the boot message: everything after the five skipped header words."""
    if len(data) < HEADER_WORDS * WORD_BYTES:
        raise InitImageError(f"Image is {len(data)} bytes; at least {HEADER_WORDS * WORD_BYTES} are required.")
    return unpack_words(data)[HEADER_WORDS:]


def read_header(data: bytes) -> ImageHeader:
    words = unpack_words(data[: HEADER_WORDS * WORD_BYTES])
    if len(words) < HEADER_WORDS:
        raise InitImageError("Image is shorter than its header.")
    return ImageHeader(magic=words[0], length=words[1], start=words[2])


def build_rom(code: Sequence[int]) -> bytes:
    if len(code) > BOOT_ROM_WORDS:
        raise ValueError(f"ROM code has {len(code)} words; the ROM holds {BOOT_ROM_WORDS}.")
    return pack_words(list(code) + [0] * (BOOT_ROM_WORDS - len(code)))
