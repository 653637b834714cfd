from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from nopsim.isa.words import WORD_MASK

COMMAND_BITS = 22
COMMAND_MASK = (1 << COMMAND_BITS) - 1
UNITS = 4
THREADS = 8
PORTS = 32
EXTERNAL_LINKS = 4
PERIPHERAL_LINES = 8
FIRST_PROCESSOR_ID = 8

CMD_LOCAL = 0
CMD_PERIPHERAL = 1
CMD_ROUTER_CONFIG = 2
CMD_FIRST_LINK = 4


class IllegalRouteError(ValueError):
    def __init__(self, destination: int, reason: str) -> None:
        super().__init__(f"Destination 0x{destination:08X} is not routable: {reason}")
        self.destination = destination


@dataclass(frozen=True)
class GlobalPort:
    raw: int

    @property
    def command(self) -> int:
        return (self.raw >> 10) & COMMAND_MASK

    @property
    def unit(self) -> int:
        return (self.raw >> 8) & 0x3

    @property
    def thread(self) -> int:
        return (self.raw >> 5) & 0x7

    @property
    def port(self) -> int:
        return self.raw & 0x1F

    @property
    def local_part(self) -> int:
        return self.raw & 0x3FF

    def __str__(self) -> str:
        return f"{self.command}:{self.unit}.{self.thread}.{self.port}"


def pack_port(processor_id: int, unit: int, thread: int, port: int) -> GlobalPort:
    for name, value, width in (
        ("processor_id", processor_id, COMMAND_BITS),
        ("unit", unit, 2),
        ("thread", thread, 3),
        ("port", port, 5),
    ):
        if not 0 <= value < (1 << width):
            raise ValueError(f"{name} {value} does not fit {width} bits.")
    return GlobalPort(((processor_id << 10) | (unit << 8) | (thread << 5) | port) & WORD_MASK)


class RouteKind(Enum):
    LOCAL_UNIT = "local"
    PERIPHERAL_LINE = "peripheral"
    ROUTER_CONFIG = "config"
    EXTERNAL_LINK = "link"
    TABLE = "table"


@dataclass(frozen=True)
class RouteTarget:
    kind: RouteKind
    index: Optional[int] = None


def classify_route(port: GlobalPort) -> RouteTarget:
    command = port.command
    if command == CMD_LOCAL:
        return RouteTarget(RouteKind.LOCAL_UNIT)
    if command == CMD_PERIPHERAL:
        return RouteTarget(RouteKind.PERIPHERAL_LINE, port.port % PERIPHERAL_LINES)
    if command == CMD_ROUTER_CONFIG:
        return RouteTarget(RouteKind.ROUTER_CONFIG)
    if CMD_FIRST_LINK <= command < CMD_FIRST_LINK + EXTERNAL_LINKS:
        return RouteTarget(RouteKind.EXTERNAL_LINK, command - CMD_FIRST_LINK)
    if command >= FIRST_PROCESSOR_ID:
        return RouteTarget(RouteKind.TABLE, command)
    raise IllegalRouteError(port.raw, f"routing command {command} is unassigned")
