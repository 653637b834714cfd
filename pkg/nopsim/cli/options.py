"""Command-line grammar of `nopsim`:

    nopsim [options] [first-own-socket [connect-to-socket ...]]

The trace options take their mask attached (`-tFF`, `--trace=FF`); given
bare they select everything. Masks are hexadecimal, with or without `0x`.
"""

from __future__ import annotations

import argparse
import os
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from nopsim.isa.ports import COMMAND_MASK, EXTERNAL_LINKS, FIRST_PROCESSOR_ID, PERIPHERAL_LINES
from nopsim.trace import ALL_EXTERN, ALL_THREADS

MAX_FILES = PERIPHERAL_LINES - 2

# option spelling -> (internal option, value when given bare)
_MASK_OPTIONS = {
    "-t": ("--trace-mask", ALL_THREADS),
    "--trace": ("--trace-mask", ALL_THREADS),
    "-x": ("--extern-mask", ALL_EXTERN),
    "--extern": ("--extern-mask", ALL_EXTERN),
    "-l": ("--intern-mask", ALL_THREADS),
    "--intern": ("--intern-mask", ALL_THREADS),
}

_EPILOG = """\
trace options (mask attached, hexadecimal; omitted = all):
  -t[MASK], --trace[=MASK]    full instruction trace, bit k = unit k/8, thread k%8
  -l[MASK], --intern[=MASK]   token trace of thread ports, same bit layout
  -x[MASK], --extern[=MASK]   token trace of links (bits 0-3), peripheral lines
                              (bits 4-11) and the router configuration block (bit 12)

--id is an extension: the processor id used by PORT, START and table routing.
exit status: 0 clean halt, 1 usage error, 2 fatal I/O, 3 halted with faulted threads
"""


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class CliOptions:
    init_path: Optional[Path] = None
    file_paths: Tuple[Path, ...] = ()
    trace_mask: Optional[int] = None
    intern_mask: Optional[int] = None
    extern_mask: Optional[int] = None
    debug: bool = False
    processor_id: Optional[int] = None
    first_own_socket: Optional[int] = None
    connect_to: Tuple[int, ...] = ()
    config_path: Optional[Path] = None
    report_path: Optional[Path] = None
    stub_links: Optional[int] = None
    max_rounds: Optional[int] = None
    verbose: bool = False
    show_help: bool = False

    @property
    def standalone(self) -> bool:
        return self.first_own_socket is None


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def _mask_type(limit: int):
    def parse(text: str) -> int:
        try:
            value = int(text, 16)
        except ValueError:
            raise argparse.ArgumentTypeError(f"malformed mask {text!r}") from None
        if not 0 <= value <= limit:
            raise argparse.ArgumentTypeError(f"mask {text} exceeds 0x{limit:X}")
        return value

    return parse


def _socket_number(text: str) -> int:
    try:
        value = int(text, 10)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a socket number: {text!r}") from None
    if not 1 <= value <= 65535:
        raise argparse.ArgumentTypeError(f"socket number {value} out of range 1..65535")
    return value


def _processor_id(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a processor id: {text!r}") from None
    if not FIRST_PROCESSOR_ID <= value <= COMMAND_MASK:
        raise argparse.ArgumentTypeError(f"processor id must be {FIRST_PROCESSOR_ID}..{COMMAND_MASK}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="nopsim",
        add_help=False,
        description="Simulator of the NOP processor.",
        epilog=_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("-h", "--help", action="store_true", dest="show_help", help="show this help and exit")
    parser.add_argument("-i", "--init", type=Path, help="init image; its first five words are skipped")
    parser.add_argument(
        "-f",
        "--file",
        action="append",
        type=Path,
        default=None,
        help="bind a file to the next peripheral line, starting at line 2 (repeatable)",
    )
    parser.add_argument("-d", "--debug", action="store_true", help="BREAK dumps registers and waits; report deadlocks")
    parser.add_argument("--id", type=_processor_id, dest="processor_id", help="processor id (default 8)")
    parser.add_argument("--config", type=Path, dest="config_path", help="YAML configuration file")
    parser.add_argument("--report", type=Path, dest="report_path", help="write a YAML halt report")
    parser.add_argument("--stub-links", type=_mask_type(0xF), help="hex mask of links left unconnected")
    parser.add_argument("--max-rounds", type=_positive_int, help="halt after this many scheduler rounds")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    parser.add_argument("--trace-mask", type=_mask_type(ALL_THREADS), help=argparse.SUPPRESS)
    parser.add_argument("--intern-mask", type=_mask_type(ALL_THREADS), help=argparse.SUPPRESS)
    parser.add_argument("--extern-mask", type=_mask_type(ALL_EXTERN), help=argparse.SUPPRESS)
    parser.add_argument("sockets", nargs="*", type=_socket_number, metavar="socket", help="first own socket, then up to four sockets to connect to")
    return parser


def _expand_mask_options(argv: Sequence[str]) -> List[str]:
    expanded: List[str] = []
    passthrough = False
    for arg in argv:
        if passthrough or not arg.startswith("-"):
            expanded.append(arg)
            continue
        if arg == "--":
            passthrough = True
            expanded.append(arg)
            continue
        if arg in _MASK_OPTIONS:
            option, bare = _MASK_OPTIONS[arg]
            expanded.extend([option, f"{bare:x}"])
            continue
        name, sep, value = arg.partition("=")
        if sep and name in _MASK_OPTIONS and name.startswith("--"):
            expanded.extend([_MASK_OPTIONS[name][0], value])
            continue
        short = arg[:2]
        if not arg.startswith("--") and short in _MASK_OPTIONS and len(arg) > 2:
            expanded.extend([_MASK_OPTIONS[short][0], arg[2:]])
            continue
        expanded.append(arg)
    return expanded


def _check_readable(path: Path, what: str, must_exist: bool) -> None:
    if not path.exists():
        if must_exist:
            raise UsageError(f"{what} {path} does not exist")
        return
    if path.is_dir() or not os.access(path, os.R_OK):
        raise UsageError(f"{what} {path} is not readable")


def parse_args(argv: Sequence[str]) -> CliOptions:
    args = build_parser().parse_args(_expand_mask_options(argv))
    if args.show_help:
        return CliOptions(show_help=True)

    sockets: List[int] = list(args.sockets)
    if len(sockets) > 1 + EXTERNAL_LINKS:
        raise UsageError(f"at most {EXTERNAL_LINKS} connect-to sockets are allowed")

    files: List[Path] = list(args.file or [])
    if len(files) > MAX_FILES:
        raise UsageError(f"at most {MAX_FILES} files can be bound to peripheral lines")
    if args.init is not None:
        _check_readable(args.init, "init image", must_exist=True)
    for path in files:
        _check_readable(path, "file", must_exist=False)

    return CliOptions(
        init_path=args.init,
        file_paths=tuple(files),
        trace_mask=args.trace_mask,
        intern_mask=args.intern_mask,
        extern_mask=args.extern_mask,
        debug=args.debug,
        processor_id=args.processor_id,
        first_own_socket=sockets[0] if sockets else None,
        connect_to=tuple(sockets[1:]),
        config_path=args.config_path,
        report_path=args.report_path,
        stub_links=args.stub_links,
        max_rounds=args.max_rounds,
        verbose=args.verbose,
    )


def format_help() -> str:
    return build_parser().format_help()
