from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from nopsim.asm.assembler import AssemblyError, assemble_items, parse, render_listing
from nopsim.asm.disassembler import disassemble
from nopsim.asm.effects import check_stack_effects
from nopsim.asm.image import HEADER_WORDS, InitImageError, build_image, build_rom, read_header, unpack_words
from nopsim.cpu.memory import BOOT_ROM_BASE
from nopsim.util.fs import atomic_write_bytes, atomic_write_text


def _entry(text: str) -> Union[int, str]:
    try:
        return int(text, 0)
    except ValueError:
        return text


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nopasm", description="Assembler and disassembler for NOP code")
    parser.add_argument("source", type=Path, help="assembler source, or an image/ROM with --disassemble")
    parser.add_argument("-o", "--output", type=Path, help="output file (default: stdout for --disassemble)")
    parser.add_argument("--rom", action="store_true", help="emit (or read) the raw 64-word boot ROM layout")
    parser.add_argument("-d", "--disassemble", action="store_true", help="disassemble an image or ROM")
    parser.add_argument("--entry", type=_entry, help="start label or word position (default: origin)")
    parser.add_argument("--origin", type=lambda s: int(s, 0), help="ROM load word address (default 0x3FC0); init images always load at 0")
    parser.add_argument("--listing", type=Path, help="write an assembly listing")
    return parser


def assemble_file(
    source_path: Path,
    output_path: Path,
    rom: bool = False,
    entry: Optional[Union[int, str]] = None,
    origin: Optional[int] = None,
    listing_path: Optional[Path] = None,
) -> Dict[str, Any]:
    if origin is not None and not rom:
        raise ValueError("--origin applies to ROM output only; the boot ROM loads init images at word 0.")
    items = parse(source_path.read_text(encoding="utf-8"))
    warnings = check_stack_effects(items)
    base = origin if origin is not None else (BOOT_ROM_BASE if rom else 0)
    assembly = assemble_items(items, origin=base, entry=entry)

    payload = build_rom(assembly.words) if rom else build_image(assembly.words, assembly.entry)
    atomic_write_bytes(output_path, payload)
    if listing_path is not None:
        atomic_write_text(listing_path, render_listing(assembly))

    return {
        "output_path": str(output_path),
        "code_words": len(assembly.words),
        "entry": assembly.entry,
        "rom": rom,
        "warnings": warnings,
        "listing_path": str(listing_path) if listing_path else None,
    }


def disassemble_file(image_path: Path, rom: bool = False) -> str:
    data = image_path.read_bytes()
    if rom:
        return disassemble(unpack_words(data), origin=BOOT_ROM_BASE, addresses=True)
    header = read_header(data)
    words = unpack_words(data)[HEADER_WORDS:]
    lines: List[str] = []
    if not header.has_magic:
        lines.append("# warning: image header has no NOPI magic")
    if not words:
        lines.append("# empty image")
        return "\n".join(lines) + "\n"
    lines.append(f"# start position {words[0]}, {len(words) - 1} code words")
    return "\n".join(lines) + "\n" + disassemble(words[1:], origin=0, addresses=True)


def main(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)

    if args.disassemble:
        try:
            text = disassemble_file(args.source, rom=args.rom)
        except (OSError, InitImageError) as exc:
            print(f"nopasm: {exc}", file=sys.stderr)
            return 2
        if args.output is None:
            sys.stdout.write(text)
        else:
            atomic_write_text(args.output, text)
        return 0

    if args.output is None:
        parser.error("Provide an output path with -o.")
    try:
        result = assemble_file(
            args.source,
            args.output,
            rom=args.rom,
            entry=args.entry,
            origin=args.origin,
            listing_path=args.listing,
        )
    except (OSError, AssemblyError, ValueError) as exc:
        print(f"nopasm: {args.source}: {exc}", file=sys.stderr)
        return 2

    for warning in result["warnings"]:
        print(f"nopasm: warning: {warning}", file=sys.stderr)
    kind = "ROM" if result["rom"] else "image"
    print(f"Wrote {kind} {result['output_path']}: {result['code_words']} code words, start {result['entry']}")
    if result["listing_path"]:
        print(f"Listing: {result['listing_path']}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
