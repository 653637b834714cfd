"""Two-pass assembler for NOP mnemonics.

Source syntax:

    # comment to end of line
    label:            define a label at the next opcode slot
    ADD  DUP  ...     operations by mnemonic (case-insensitive)
    42  -7  0x1234    integer literals; wide values become COMBINE chains
    @label            offset from the next operation to the label (UJP/FJP/CALL)
    &label            absolute opcode position of the label (JUMP targets)
    .byte N           one raw opcode byte
    .word N           pad to a word boundary, then one raw data word
    .align            pad to a word boundary with NOP

Tokens are separated by whitespace or `;`. Opcodes are packed least
significant byte first; trailing slots are padded with NOP.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

from nopsim.isa.opcodes import BY_MNEMONIC, IMMEDIATE_MAX, IMMEDIATE_MIN, Op, immediate_byte
from nopsim.isa.words import WORD_MASK, to_signed, to_word

SLOTS_PER_WORD = 4
COMBINE_BASE = 192
NOP_BYTE = int(Op.NOP)
_LABEL_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.]*$")
_MAX_RELAXATION_PASSES = 64


class AssemblyError(ValueError):
    def __init__(self, line: int, message: str) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Mnemonic:
    op: Op
    line: int


@dataclass(frozen=True)
class Literal:
    value: int
    line: int


@dataclass(frozen=True)
class LabelRef:
    name: str
    line: int
    absolute: bool = False


@dataclass(frozen=True)
class LabelDef:
    name: str
    line: int


@dataclass(frozen=True)
class RawByte:
    value: int
    line: int


@dataclass(frozen=True)
class RawWord:
    value: int
    line: int


@dataclass(frozen=True)
class Align:
    line: int


Item = Union[Mnemonic, Literal, LabelRef, LabelDef, RawByte, RawWord, Align]


@dataclass(frozen=True)
class ListingEntry:
    position: int
    data: Tuple[int, ...]
    text: str
    line: int


@dataclass(frozen=True)
class Assembly:
    words: Tuple[int, ...]
    origin: int
    entry: int
    labels: Dict[str, int] = field(default_factory=dict)
    listing: Tuple[ListingEntry, ...] = ()


def parse_number(text: str, line: int) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise AssemblyError(line, f"not a number: {text!r}") from None
    if not -(1 << 31) <= value <= WORD_MASK:
        raise AssemblyError(line, f"literal {text} does not fit a 32-bit word")
    return value


def tokenize(source: str) -> List[Tuple[str, int]]:
    tokens: List[Tuple[str, int]] = []
    for number, raw in enumerate(source.splitlines(), start=1):
        code = raw.split("#", 1)[0]
        for text in code.replace(";", " ").split():
            tokens.append((text, number))
    return tokens


def parse(source: str) -> List[Item]:
    items: List[Item] = []
    tokens = tokenize(source)
    index = 0
    while index < len(tokens):
        text, line = tokens[index]
        index += 1
        if text.endswith(":"):
            name = text[:-1]
            if not _LABEL_RE.match(name):
                raise AssemblyError(line, f"invalid label name {name!r}")
            items.append(LabelDef(name, line))
        elif text[0] in "@&":
            name = text[1:]
            if not _LABEL_RE.match(name):
                raise AssemblyError(line, f"invalid label reference {text!r}")
            items.append(LabelRef(name, line, absolute=text[0] == "&"))
        elif text.startswith("."):
            directive = text.lower()
            if directive == ".align":
                items.append(Align(line))
                continue
            if directive not in (".byte", ".word"):
                raise AssemblyError(line, f"unknown directive {text}")
            if index >= len(tokens):
                raise AssemblyError(line, f"{directive} needs a value")
            operand, _ = tokens[index]
            index += 1
            value = parse_number(operand, line)
            if directive == ".byte":
                if not -0x80 <= value <= 0xFF:
                    raise AssemblyError(line, f".byte value {operand} does not fit a byte")
                items.append(RawByte(value & 0xFF, line))
            else:
                items.append(RawWord(to_word(value), line))
        elif text[0].isdigit() or (text[0] in "+-" and len(text) > 1):
            items.append(Literal(parse_number(text, line), line))
        else:
            op = BY_MNEMONIC.get(text.upper())
            if op is None:
                raise AssemblyError(line, f"unknown mnemonic {text}")
            items.append(Mnemonic(op, line))
    return items


def _balanced_digits(value: int) -> List[int]:
    digits: List[int] = []
    while not IMMEDIATE_MIN <= value <= IMMEDIATE_MAX:
        digit = (value - IMMEDIATE_MIN) % COMBINE_BASE + IMMEDIATE_MIN
        digits.append(digit)
        value = (value - digit) // COMBINE_BASE
    digits.append(value)
    digits.reverse()
    return digits


def literal_bytes(value: int) -> List[int]:
    """Opcode bytes that push `value` (taken modulo 2**32).

    The value is written in base 192 with digits in the immediate range
    -64..127, most significant digit first, each further digit followed by
    COMBINE. Both the signed and the unsigned reading are tried and the
    shorter chain wins, the signed one on a tie.
    """
    word = to_word(value)
    signed = to_signed(word)
    digits = _balanced_digits(signed)
    if signed != word:
        unsigned_digits = _balanced_digits(word)
        if len(unsigned_digits) < len(digits):
            digits = unsigned_digits
    out = [immediate_byte(digits[0])]
    for digit in digits[1:]:
        out.append(immediate_byte(digit))
        out.append(int(Op.COMBINE))
    return out


def _item_text(item: Item) -> str:
    if isinstance(item, Mnemonic):
        return item.op.name
    if isinstance(item, Literal):
        return str(item.value)
    if isinstance(item, LabelRef):
        return ("&" if item.absolute else "@") + item.name
    if isinstance(item, RawByte):
        return f".byte 0x{item.value:02X}"
    if isinstance(item, RawWord):
        return f".word 0x{item.value:08X}"
    return ".align"


def _padding(position: int) -> int:
    return (-position) % SLOTS_PER_WORD


class _Layout:
    def __init__(self, items: Sequence[Item], origin: int) -> None:
        self.items = items
        self.origin = origin
        self.ref_sizes: Dict[int, int] = {i: 1 for i, item in enumerate(items) if isinstance(item, LabelRef)}
        self.positions: List[int] = []
        self.labels: Dict[str, int] = {}

    def _size(self, index: int, position: int) -> int:
        item = self.items[index]
        if isinstance(item, (Mnemonic, RawByte)):
            return 1
        if isinstance(item, Literal):
            return len(literal_bytes(item.value))
        if isinstance(item, LabelRef):
            return self.ref_sizes[index]
        if isinstance(item, RawWord):
            return _padding(position) + SLOTS_PER_WORD
        if isinstance(item, Align):
            return _padding(position)
        return 0

    def place(self) -> None:
        position = 0
        self.positions = []
        self.labels = {}
        for index, item in enumerate(self.items):
            self.positions.append(position)
            if isinstance(item, LabelDef):
                if item.name in self.labels:
                    raise AssemblyError(item.line, f"label {item.name} defined twice")
                self.labels[item.name] = position
            position += self._size(index, position)
        self.end = position

    def reference_position(self, index: int) -> int:
        """Opcode position a relative reference is measured from: the next operation."""
        for follower in range(index + 1, len(self.items)):
            if isinstance(self.items[follower], Mnemonic):
                return self.positions[follower]
        item = self.items[index]
        raise AssemblyError(item.line, f"@{item.name} is not followed by an operation")  # type: ignore[union-attr]

    def reference_value(self, index: int) -> int:
        item = self.items[index]
        assert isinstance(item, LabelRef)
        if item.name not in self.labels:
            raise AssemblyError(item.line, f"undefined label {item.name}")
        target = self.labels[item.name]
        if item.absolute:
            return self.origin * SLOTS_PER_WORD + target
        return target - self.reference_position(index)

    def relax(self) -> None:
        # Reference sizes only grow, so the fixpoint is reached in bounded passes.
        for _ in range(_MAX_RELAXATION_PASSES):
            self.place()
            changed = False
            for index in self.ref_sizes:
                needed = len(literal_bytes(self.reference_value(index)))
                if needed > self.ref_sizes[index]:
                    self.ref_sizes[index] = needed
                    changed = True
            if not changed:
                return
        raise AssemblyError(self.items[0].line if self.items else 0, "label layout did not converge")


def _emit(layout: _Layout) -> Tuple[List[int], List[ListingEntry]]:
    data: List[int] = []
    listing: List[ListingEntry] = []
    for index, item in enumerate(layout.items):
        position = layout.positions[index]
        if isinstance(item, Mnemonic):
            emitted = [int(item.op)]
        elif isinstance(item, Literal):
            emitted = literal_bytes(item.value)
        elif isinstance(item, LabelRef):
            emitted = literal_bytes(layout.reference_value(index))
            emitted += [NOP_BYTE] * (layout.ref_sizes[index] - len(emitted))
        elif isinstance(item, RawByte):
            emitted = [item.value]
        elif isinstance(item, RawWord):
            emitted = [NOP_BYTE] * _padding(position) + list(item.value.to_bytes(4, "little"))
        elif isinstance(item, Align):
            emitted = [NOP_BYTE] * _padding(position)
        else:
            emitted = []
        data.extend(emitted)
        if not isinstance(item, LabelDef):
            listing.append(ListingEntry(position, tuple(emitted), _item_text(item), item.line))
    data.extend([NOP_BYTE] * _padding(len(data)))
    return data, listing


def pack_words(data: Sequence[int]) -> List[int]:
    padded = list(data) + [NOP_BYTE] * _padding(len(data))
    return [int.from_bytes(bytes(padded[i : i + SLOTS_PER_WORD]), "little") for i in range(0, len(padded), SLOTS_PER_WORD)]


def assemble_items(items: Sequence[Item], origin: int = 0, entry: Optional[Union[str, int]] = None) -> Assembly:
    layout = _Layout(items, origin)
    layout.relax()
    data, listing = _emit(layout)

    if entry is None:
        start = origin
    elif isinstance(entry, int):
        start = entry
    else:
        if entry not in layout.labels:
            raise AssemblyError(0, f"entry label {entry} is not defined")
        position = layout.labels[entry]
        if position % SLOTS_PER_WORD:
            raise AssemblyError(0, f"entry label {entry} is not word aligned; add .align before it")
        start = origin + position // SLOTS_PER_WORD

    return Assembly(
        words=tuple(pack_words(data)),
        origin=origin,
        entry=start,
        labels={name: origin * SLOTS_PER_WORD + pos for name, pos in layout.labels.items()},
        listing=tuple(listing),
    )


def assemble(source: str, origin: int = 0, entry: Optional[Union[str, int]] = None) -> Assembly:
    return assemble_items(parse(source), origin=origin, entry=entry)


def render_listing(assembly: Assembly) -> str:
    lines = []
    for entry in assembly.listing:
        ip = assembly.origin * SLOTS_PER_WORD + entry.position
        hex_bytes = " ".join(f"{b:02x}" for b in entry.data)
        lines.append(f"{ip >> 2:04x}.{ip & 3}  {hex_bytes:<24} {entry.text}  # line {entry.line}")
    for name, ip in sorted(assembly.labels.items(), key=lambda kv: kv[1]):
        lines.append(f"# {name} = {ip >> 2:04x}.{ip & 3}")
    return "\n".join(lines) + "\n"
