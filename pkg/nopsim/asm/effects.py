"""Advisory stack-depth checker over parsed assembler items.

Depth is tracked per straight-line segment, starting at zero at the top of
the program and at every label. After an unconditional transfer (UJP, JUMP,
STOP, WAIT) or a POPN the depth is unknown and checking resumes at the next
label.
"""

from __future__ import annotations

from typing import List, Sequence

from nopsim.asm.assembler import Item, LabelDef, LabelRef, Literal, Mnemonic, RawByte, RawWord
from nopsim.isa.opcodes import STACK_EFFECTS, Op, OpcodeKind, classify

_ENDS_SEGMENT = frozenset({Op.UJP, Op.JUMP, Op.STOP, Op.WAIT, Op.POPN})


def check_stack_effects(items: Sequence[Item]) -> List[str]:
    warnings: List[str] = []
    depth = 0
    known = True

    for item in items:
        if isinstance(item, LabelDef):
            depth, known = 0, True
            continue
        if not known:
            continue
        if isinstance(item, (Literal, LabelRef)):
            depth += 1
            continue
        if isinstance(item, RawWord):
            known = False
            continue

        if isinstance(item, RawByte):
            opcode = classify(item.value)
            if opcode.kind is OpcodeKind.IMMEDIATE:
                depth += 1
                continue
            if opcode.kind is OpcodeKind.ILLEGAL:
                known = False
                continue
            op = opcode.operation
        elif isinstance(item, Mnemonic):
            op = item.op
        else:
            continue

        pops, pushes = STACK_EFFECTS[op]
        if depth < pops:
            warnings.append(f"line {item.line}: {op.name} takes {pops} operand(s) but the segment has pushed {depth}")
            depth = 0
        else:
            depth -= pops
        depth += pushes
        if op in _ENDS_SEGMENT:
            known = False
    return warnings
