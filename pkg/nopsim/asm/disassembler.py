from __future__ import annotations

from typing import Iterable, List

from nopsim.isa.opcodes import decode

SLOTS_PER_WORD = 4


def disassemble_word(word: int) -> str:
    return " ; ".join(decode(word, slot).mnemonic for slot in range(SLOTS_PER_WORD))


def disassemble(words: Iterable[int], origin: int = 0, addresses: bool = False) -> str:
    """One source line per word; the result assembles back to the same words."""
    lines: List[str] = []
    for offset, word in enumerate(words):
        text = disassemble_word(word)
        if addresses:
            text = f"{text:<40} # {origin + offset:04x}"
        lines.append(text)
    return "\n".join(lines) + ("\n" if lines else "")
