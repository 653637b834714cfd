from __future__ import annotations

WORD_BITS = 32
WORD_MASK = 0xFFFFFFFF
SIGN_BIT = 0x80000000
TRUE = WORD_MASK
FALSE = 0


def to_word(value: int) -> int:
    return value & WORD_MASK


def to_signed(word: int) -> int:
    word &= WORD_MASK
    return word - (1 << WORD_BITS) if word & SIGN_BIT else word


def as_bool(flag: bool) -> int:
    return TRUE if flag else FALSE
