"""Opcode table and decoding: immediates, named operations, illegal bytes."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Dict, Tuple

from nopsim.isa.words import to_word

__all__ = [
    "Op",
    "OpcodeKind",
    "Opcode",
    "BY_MNEMONIC",
    "STACK_EFFECTS",
    "IMMEDIATE_MIN",
    "IMMEDIATE_MAX",
    "classify",
    "decode",
    "imm_value",
    "immediate_byte",
]

IMMEDIATE_MIN = -64
IMMEDIATE_MAX = 127
SLOTS_PER_WORD = 4


class Op(IntEnum):
    NOP = 0x80
    ADD = 0x81
    SUB = 0x82
    MUL = 0x83
    UDIV = 0x84
    SDIV = 0x85
    AND = 0x86
    OR = 0x87
    XOR = 0x88
    POP = 0x89
    DUP = 0x8A
    EXCH = 0x8B
    LDX = 0x8C
    SWAP = 0x8D
    DECLD = 0x8E
    LOG2 = 0x8F
    LEFT = 0x90
    RIGHT = 0x91
    SIGN = 0x92
    ZERO = 0x93
    UJP = 0x94
    FJP = 0x95
    LDC = 0x96
    LD = 0x97
    ST = 0x98
    COUNT = 0x99
    STOP = 0x9A
    BREAK = 0x9B
    START = 0x9C
    CALL = 0x9D
    JUMP = 0x9E
    STX = 0x9F
    LDINC = 0xA0
    GETPORT = 0xA1
    SETPORT = 0xA2
    OUT = 0xA3
    OUTEND = 0xA4
    OUTPAUSE = 0xA5
    IN = 0xA6
    INMORE = 0xA7
    EVCLEAR = 0xA8
    EVOUT = 0xA9
    EVIN = 0xAA
    EVEND = 0xAB
    WAIT = 0xAC
    NOW = 0xAD
    WAITTMO = 0xAE
    POPN = 0xAF
    ULESS = 0xB0
    SLESS = 0xB1
    COMBINE = 0xB2
    PORT = 0xB3
    LDAX = 0xB4
    THREADS = 0xB5
    THRCYC = 0xB6
    CYCLES = 0xB7


class OpcodeKind(Enum):
    IMMEDIATE = "immediate"
    OPERATION = "operation"
    ILLEGAL = "illegal"


@dataclass(frozen=True)
class Opcode:
    byte: int
    kind: OpcodeKind

    @property
    def operation(self) -> Op:
        if self.kind is not OpcodeKind.OPERATION:
            raise ValueError(f"Opcode 0x{self.byte:02X} is not an operation.")
        return Op(self.byte)

    @property
    def mnemonic(self) -> str:
        if self.kind is OpcodeKind.OPERATION:
            return Op(self.byte).name
        if self.kind is OpcodeKind.IMMEDIATE:
            return str(_signed_byte(self.byte))
        return f".byte 0x{self.byte:02X}"


BY_MNEMONIC: Dict[str, Op] = {op.name: op for op in Op}

# (pops, pushes) per operation; POPN additionally moves sp by its operand.
STACK_EFFECTS: Dict[Op, Tuple[int, int]] = {
    Op.NOP: (0, 0),
    Op.ADD: (2, 1),
    Op.SUB: (2, 1),
    Op.MUL: (2, 1),
    Op.UDIV: (2, 2),
    Op.SDIV: (2, 2),
    Op.AND: (2, 1),
    Op.OR: (2, 1),
    Op.XOR: (2, 1),
    Op.POP: (1, 0),
    Op.DUP: (1, 2),
    Op.EXCH: (2, 2),
    Op.LDX: (1, 1),
    Op.SWAP: (2, 1),
    Op.DECLD: (1, 1),
    Op.LOG2: (1, 1),
    Op.LEFT: (3, 1),
    Op.RIGHT: (3, 1),
    Op.SIGN: (1, 1),
    Op.ZERO: (1, 1),
    Op.UJP: (1, 0),
    Op.FJP: (2, 0),
    Op.LDC: (1, 1),
    Op.LD: (1, 1),
    Op.ST: (2, 0),
    Op.COUNT: (1, 1),
    Op.STOP: (0, 0),
    Op.BREAK: (0, 0),
    Op.START: (6, 1),
    Op.CALL: (1, 1),
    Op.JUMP: (1, 0),
    Op.STX: (2, 0),
    Op.LDINC: (1, 1),
    Op.GETPORT: (1, 1),
    Op.SETPORT: (2, 0),
    Op.OUT: (2, 0),
    Op.OUTEND: (1, 0),
    Op.OUTPAUSE: (1, 0),
    Op.IN: (1, 1),
    Op.INMORE: (1, 1),
    Op.EVCLEAR: (0, 0),
    Op.EVOUT: (2, 0),
    Op.EVIN: (2, 0),
    Op.EVEND: (2, 0),
    Op.WAIT: (0, 0),
    Op.NOW: (0, 1),
    Op.WAITTMO: (1, 0),
    Op.POPN: (1, 0),
    Op.ULESS: (2, 1),
    Op.SLESS: (2, 1),
    Op.COMBINE: (2, 1),
    Op.PORT: (1, 1),
    Op.LDAX: (1, 1),
    Op.THREADS: (0, 1),
    Op.THRCYC: (0, 1),
    Op.CYCLES: (0, 1),
}


def _signed_byte(byte: int) -> int:
    return byte - 0x100 if byte & 0x80 else byte


def classify(byte: int) -> Opcode:
    byte &= 0xFF
    if byte < 0x80 or byte >= 0xC0:
        return Opcode(byte, OpcodeKind.IMMEDIATE)
    if byte <= max(Op):
        return Opcode(byte, OpcodeKind.OPERATION)
    return Opcode(byte, OpcodeKind.ILLEGAL)


def decode(word: int, slot: int) -> Opcode:
    """Extract opcode `slot` (0 = least significant byte) from an instruction word."""
    if not 0 <= slot < SLOTS_PER_WORD:
        raise ValueError(f"Opcode slot must be 0..3, got {slot}.")
    return classify((word >> (8 * slot)) & 0xFF)


def imm_value(opcode: Opcode) -> int:
    if opcode.kind is not OpcodeKind.IMMEDIATE:
        raise ValueError(f"Opcode 0x{opcode.byte:02X} is not an immediate constant.")
    return to_word(_signed_byte(opcode.byte))


def immediate_byte(value: int) -> int:
    if not IMMEDIATE_MIN <= value <= IMMEDIATE_MAX:
        raise ValueError(f"Immediate {value} outside {IMMEDIATE_MIN}..{IMMEDIATE_MAX}.")
    return value & 0xFF
