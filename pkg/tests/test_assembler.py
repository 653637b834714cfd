import io
import random
import tempfile
import unittest
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path

from nopsim.asm.assembler import AssemblyError, assemble, literal_bytes, parse, render_listing
from nopsim.asm.disassembler import disassemble, disassemble_word
from nopsim.asm.effects import check_stack_effects
from nopsim.asm.image import (
    HEADER_WORDS,
    IMAGE_MAGIC,
    InitImageError,
    build_image,
    build_rom,
    read_header,
    read_image,
    unpack_words,
)
from nopsim.cli import asm
from nopsim.cpu.memory import BOOT_ROM_WORDS
from nopsim.isa.opcodes import Op
from tests.harness import CODE_BASE, Machine
from tests.oracles import evaluate_literal

LITERALS = [0, 1, -1, 127, 128, -64, -65, 191, 192, 12345, -12345, 0x7FFFFFFF, 0x80000000, 0xFFFFFFFF, 0xDEADBEEF]


def _write(directory: str, name: str, text: str) -> Path:
    path = Path(directory) / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLiterals(unittest.TestCase):
    def test_single_byte_literals(self) -> None:
        self.assertEqual(literal_bytes(127), [0x7F])
        self.assertEqual(literal_bytes(0), [0x00])
        self.assertEqual(literal_bytes(-1), [0xFF])
        self.assertEqual(literal_bytes(-64), [0xC0])
        self.assertEqual(literal_bytes(0xFFFFFFFF), [0xFF])

    def test_chains_use_combine(self) -> None:
        self.assertEqual(literal_bytes(128), [0x01, 0xC0, int(Op.COMBINE)])
        self.assertEqual(literal_bytes(192), [0x01, 0x00, int(Op.COMBINE)])

    def test_chains_push_their_value(self) -> None:
        rng = random.Random(5)
        values = LITERALS + [rng.getrandbits(32) for _ in range(2000)]
        for start in range(0, len(values), 200):
            batch = values[start : start + 200]
            machine = Machine.from_source(" ".join(str(value) for value in batch) + " STOP")
            machine.run(limit=5000)
            self.assertTrue(machine.stopped)
            self.assertEqual(machine.ctx.stop_reason.name, "EXPLICIT_STOP")
            self.assertEqual(machine.stack(), [value & 0xFFFFFFFF for value in batch])

    def test_chains_evaluate_to_their_word(self) -> None:
        rng = random.Random(8)
        for _ in range(100_000):
            value = rng.getrandbits(32)
            self.assertEqual(evaluate_literal(literal_bytes(value)), value)

    def test_chain_length_is_bounded(self) -> None:
        rng = random.Random(6)
        for _ in range(2000):
            self.assertLessEqual(len(literal_bytes(rng.getrandbits(32))), 11)


class TestAssemble(unittest.TestCase):
    def test_packs_least_significant_byte_first(self) -> None:
        self.assertEqual(assemble("5 7 ADD STOP").words, (0x9A810705,))
        self.assertEqual(assemble("ADD").words, (0x80808081,))
        self.assertEqual(assemble("add ; stop").words, assemble("ADD STOP").words)

    def test_comments_and_empty_source(self) -> None:
        self.assertEqual(assemble("# nothing here\n\n").words, ())
        self.assertEqual(assemble("1 # one\n2 ADD").words, assemble("1 2 ADD").words)

    def test_labels_are_absolute_positions(self) -> None:
        assembly = assemble("NOP NOP\nhere: STOP", origin=CODE_BASE)
        self.assertEqual(assembly.labels["here"], CODE_BASE * 4 + 2)
        self.assertEqual(assemble("a: NOP &a JUMP", origin=CODE_BASE).words[0] & 0xFF, 0x80)

    def test_relative_reference_loop(self) -> None:
        machine = Machine.from_source(
            """
            10                   # counter
            loop: 1 SUB DUP @done FJP
            @loop UJP
            done: 77 STOP
            """
        )
        machine.run()
        self.assertTrue(machine.stopped)
        self.assertEqual(machine.stack(), [0, 77])

    def test_call_and_jump_back(self) -> None:
        machine = Machine.from_source(
            """
            3 @double CALL 99 STOP
            double: EXCH DUP ADD EXCH JUMP
            """
        )
        machine.run()
        self.assertEqual(machine.stack(), [6, 99])

    def test_entry_label(self) -> None:
        assembly = assemble("1 STOP .align main: 2 STOP", origin=4, entry="main")
        self.assertEqual(assembly.entry, 5)
        with self.assertRaises(AssemblyError):
            assemble("1 main: 2 STOP", entry="main")
        with self.assertRaises(AssemblyError):
            assemble("STOP", entry="missing")

    def test_directives(self) -> None:
        self.assertEqual(assemble(".byte 0xB8").words, (0x808080B8,))
        self.assertEqual(assemble("1 .word 0x12345678").words, (0x80808001, 0x12345678))
        self.assertEqual(assemble("1 .align 2").words, (0x80808001, 0x80808002))

    def test_errors_carry_line_numbers(self) -> None:
        cases = {
            "NOP\nFROB": 2,
            "1\n2\n@nowhere UJP": 3,
            "x: NOP\nx: NOP": 2,
            ".byte 300": 1,
            "NOP\n.word": 2,
            ".org 5": 1,
            "0x100000000": 1,
            "1 @tail": 1,
        }
        for source, line in cases.items():
            with self.assertRaises(AssemblyError, msg=source) as ctx:
                assemble(source)
            self.assertEqual(ctx.exception.line, line, source)
            self.assertTrue(str(ctx.exception).startswith(f"line {line}:"))

    def test_listing(self) -> None:
        text = render_listing(assemble("start: 5 7 ADD STOP", origin=CODE_BASE))
        self.assertIn("0100.0  05", text)
        self.assertIn("ADD  # line 1", text)
        self.assertIn("# start = 0100.0", text)


class TestStackEffects(unittest.TestCase):
    def test_underflow_warns(self) -> None:
        warnings = check_stack_effects(parse("ADD"))
        self.assertEqual(len(warnings), 1)
        self.assertTrue(warnings[0].startswith("line 1: ADD takes 2"))

    def test_balanced_code_is_clean(self) -> None:
        self.assertEqual(check_stack_effects(parse("1 2 ADD STOP")), [])
        self.assertEqual(check_stack_effects(parse("1 @x UJP\nx: 4 5 MUL")), [])

    def test_label_resets_depth(self) -> None:
        self.assertEqual(len(check_stack_effects(parse("1 2\nx: ADD"))), 1)

    def test_unknown_depth_after_jump(self) -> None:
        self.assertEqual(check_stack_effects(parse("1 UJP ADD ADD")), [])


class TestDisassemble(unittest.TestCase):
    def test_examples(self) -> None:
        self.assertEqual(disassemble_word(0x9A810705), "5 ; 7 ; ADD ; STOP")
        self.assertEqual(disassemble_word(0x80808080), "NOP ; NOP ; NOP ; NOP")
        self.assertEqual(disassemble_word(0xB8), ".byte 0xB8 ; 0 ; 0 ; 0")
        self.assertEqual(disassemble_word(0xFFC07F80), "NOP ; 127 ; -64 ; -1")

    def test_addresses(self) -> None:
        text = disassemble([0x80808080, 0x9A810705], origin=0x100, addresses=True)
        lines = text.splitlines()
        self.assertTrue(lines[0].endswith("# 0100"))
        self.assertTrue(lines[1].endswith("# 0101"))
        self.assertEqual(disassemble([]), "")

    def test_round_trip_of_random_images(self) -> None:
        rng = random.Random(2024)
        words = tuple(rng.getrandbits(32) for _ in range(10_000))
        self.assertEqual(assemble(disassemble(words)).words, words)

    def test_round_trip_with_addresses(self) -> None:
        words = assemble("loop: 1 2 ADD @loop UJP .word 0xCAFEBABE").words
        self.assertEqual(assemble(disassemble(words, addresses=True)).words, words)


class TestImages(unittest.TestCase):
    def test_build_and_read(self) -> None:
        code = assemble("5 7 ADD STOP").words
        data = build_image(code, 0)
        self.assertEqual(len(data), (HEADER_WORDS + 2) * 4)
        self.assertEqual(read_image(data), [0, 0x9A810705])
        header = read_header(data)
        self.assertTrue(header.has_magic)
        self.assertEqual((header.magic, header.length, header.start), (IMAGE_MAGIC, 2, 0))

    def test_header_only_is_an_empty_message(self) -> None:
        self.assertEqual(read_image(bytes(20)), [])

    def test_ragged_and_short_files(self) -> None:
        with self.assertRaises(InitImageError):
            read_image(bytes(21))
        with self.assertRaises(InitImageError):
            read_image(bytes(16))

    def test_rom_is_padded(self) -> None:
        data = build_rom([1, 2])
        self.assertEqual(unpack_words(data), [1, 2] + [0] * (BOOT_ROM_WORDS - 2))
        with self.assertRaises(ValueError):
            build_rom([0] * (BOOT_ROM_WORDS + 1))


class TestAssemblerCli(unittest.TestCase):
    def test_assemble_then_disassemble(self) -> None:
        with tempfile.TemporaryDirectory() as td:
            source = _write(td, "add.nop", "5 7 ADD STOP\n")
            image = Path(td) / "add.img"
            listing = Path(td) / "add.lst"
            stdout, stderr = io.StringIO(), io.StringIO()
            with redirect_stdout(stdout), redirect_stderr(stderr):
                code = asm.main([str(source), "-o", str(image), "--listing", str(listing)])
            self.assertEqual(code, 0)
            self.assertIn("1 code words, start 0", stdout.getvalue())
            self.assertEqual(stderr.getvalue(), "")
            self.assertEqual(read_image(image.read_bytes()), [0, 0x9A810705])
            self.assertTrue(listing.exists())

            text = asm.disassemble_file(image)
            self.assertIn("# start position 0, 1 code words", text)
            self.assertIn("5 ; 7 ; ADD ; STOP", text)

    def test_warnings_go_to_stderr(self) -> None:
        with tempfile.TemporaryDirectory() as td:
            source = _write(td, "bad.nop", "ADD STOP\n")
            stderr = io.StringIO()
            with redirect_stdout(io.StringIO()), redirect_stderr(stderr):
                code = asm.main([str(source), "-o", str(Path(td) / "bad.img")])
            self.assertEqual(code, 0)
            self.assertIn("nopasm: warning: line 1: ADD", stderr.getvalue())

    def test_assembly_error_exit_code(self) -> None:
        with tempfile.TemporaryDirectory() as td:
            source = _write(td, "err.nop", "NOP\nFROB\n")
            stderr = io.StringIO()
            with redirect_stderr(stderr):
                code = asm.main([str(source), "-o", str(Path(td) / "err.img")])
            self.assertEqual(code, 2)
            self.assertIn("line 2: unknown mnemonic FROB", stderr.getvalue())
            self.assertFalse((Path(td) / "err.img").exists())

    def test_origin_requires_rom(self) -> None:
        with tempfile.TemporaryDirectory() as td:
            source = _write(td, "org.nop", "a: &a STOP\n")
            stderr = io.StringIO()
            with redirect_stderr(stderr):
                code = asm.main([str(source), "-o", str(Path(td) / "org.img"), "--origin", "0x100"])
            self.assertEqual(code, 2)
            self.assertIn("--origin applies to ROM output only", stderr.getvalue())
            self.assertFalse((Path(td) / "org.img").exists())

    def test_rom_output(self) -> None:
        with tempfile.TemporaryDirectory() as td:
            source = _write(td, "rom.nop", "0 IN STOP\n")
            rom = Path(td) / "rom.bin"
            with redirect_stdout(io.StringIO()):
                self.assertEqual(asm.main([str(source), "-o", str(rom), "--rom"]), 0)
            self.assertEqual(len(rom.read_bytes()), BOOT_ROM_WORDS * 4)
            self.assertIn("# 3fc0", asm.disassemble_file(rom, rom=True))

    def test_disassemble_headerless_image(self) -> None:
        with tempfile.TemporaryDirectory() as td:
            path = Path(td) / "raw.img"
            path.write_bytes(bytes(20))
            text = asm.disassemble_file(path)
            self.assertIn("no NOPI magic", text)
            self.assertIn("# empty image", text)


if __name__ == "__main__":
    unittest.main()
