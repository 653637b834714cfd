from __future__ import annotations

from array import array
from typing import Iterable

from nopsim.cpu.faults import FaultReason, ThreadFault
from nopsim.isa.words import WORD_MASK

MEMORY_WORDS = 16384
BOOT_ROM_BASE = 0x3FC0
BOOT_ROM_WORDS = MEMORY_WORDS - BOOT_ROM_BASE


class Memory:
    """Local memory of one processing unit; the top 64 words are read-only ROM."""

    def __init__(self, size: int = MEMORY_WORDS) -> None:
        self._words = array("I", bytes(4 * size))
        self.size = size

    def _check(self, address: int) -> None:
        if not 0 <= address < self.size:
            raise ThreadFault(FaultReason.SP_OUT_OF_RANGE, f"address 0x{address:X} outside local memory")

    def read(self, address: int) -> int:
        self._check(address)
        return self._words[address]

    def write(self, address: int, value: int) -> None:
        self._check(address)
        if address >= BOOT_ROM_BASE:
            raise ThreadFault(FaultReason.SP_OUT_OF_RANGE, f"write to boot ROM at 0x{address:X}")
        self._words[address] = value & WORD_MASK

    def install_rom(self, words: Iterable[int]) -> None:
        image = list(words)
        if len(image) > BOOT_ROM_WORDS:
            raise ValueError(f"Boot ROM image has {len(image)} words; the region holds {BOOT_ROM_WORDS}.")
        image.extend([0] * (BOOT_ROM_WORDS - len(image)))
        for offset, word in enumerate(image):
            self._words[BOOT_ROM_BASE + offset] = word & WORD_MASK

    def load(self, address: int, words: Iterable[int]) -> None:
        for offset, word in enumerate(words):
            self.write(address + offset, word)

    def snapshot(self) -> bytes:
        return self._words.tobytes()
