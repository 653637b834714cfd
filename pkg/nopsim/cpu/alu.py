"""Word-level arithmetic and bit-field operations of the instruction set.

All inputs and results are 32-bit words (unsigned ints); signed opcodes
reinterpret them as two's complement.
"""

from __future__ import annotations

from typing import Tuple

from nopsim.cpu.faults import FaultReason, ThreadFault
from nopsim.isa.words import WORD_BITS, WORD_MASK, SIGN_BIT, as_bool, to_signed, to_word

COMBINE_BASE = 192
_SWAP_MASKS = (0x55555555, 0x33333333, 0x0F0F0F0F, 0x00FF00FF, 0x0000FFFF)


def add(b: int, a: int) -> int:
    return to_word(b + a)


def sub(b: int, a: int) -> int:
    return to_word(b - a)


def mul(b: int, a: int) -> int:
    return to_word(b * a)


def udiv(b: int, a: int) -> Tuple[int, int]:
    if a == 0:
        raise ThreadFault(FaultReason.DIVIDE_BY_ZERO)
    q = b // a
    return q, to_word(b - q * a)


def sdiv(b: int, a: int) -> Tuple[int, int]:
    """Euclidean division: the remainder satisfies 0 <= r < |a|."""
    sa = to_signed(a)
    if sa == 0:
        raise ThreadFault(FaultReason.DIVIDE_BY_ZERO)
    sb = to_signed(b)
    r = sb % abs(sa)
    q = (sb - r) // sa
    return to_word(q), to_word(r)


def uless(b: int, a: int) -> int:
    return as_bool(b < a)


def sless(b: int, a: int) -> int:
    return as_bool(to_signed(b) < to_signed(a))


def sign(a: int) -> int:
    return as_bool(bool(a & SIGN_BIT))


def zero(a: int) -> int:
    return as_bool(a == 0)


def combine(b: int, a: int) -> int:
    return to_word(b * COMBINE_BASE + a)


def swap_bits(word: int, mask: int) -> int:
    """Exchange bit k with bit k ^ 2**i for every bit i set in the 5-bit mask."""
    for i, low_halves in enumerate(_SWAP_MASKS):
        if mask & (1 << i):
            distance = 1 << i
            word = ((word & low_halves) << distance) | ((word >> distance) & low_halves)
    return word


def shift_left(shifter: int, rotator: int, count: int) -> int:
    n = count & 31
    source = shifter if count < WORD_BITS else rotator
    result = (source << n) & WORD_MASK
    if n:
        result |= rotator >> (WORD_BITS - n)
    return result


def shift_right(shifter: int, rotator: int, count: int) -> int:
    n = count & 31
    source = shifter if count < WORD_BITS else rotator
    result = source >> n
    if n:
        result |= (rotator << (WORD_BITS - n)) & WORD_MASK
    return result


def log2(a: int) -> int:
    return to_word(a.bit_length() - 1)


def count(a: int) -> int:
    return bin(a & WORD_MASK).count("1")
