import tempfile
import unittest
from pathlib import Path

from nopsim.cli.options import CliOptions, UsageError, format_help, parse_args


class TestParseArgs(unittest.TestCase):
    def test_no_arguments_is_standalone(self) -> None:
        options = parse_args([])
        self.assertEqual(options, CliOptions())
        self.assertTrue(options.standalone)

    def test_init_and_sockets(self) -> None:
        with tempfile.TemporaryDirectory() as td:
            image = Path(td) / "boot.img"
            image.write_bytes(bytes(20))
            options = parse_args(["-i", str(image), "9000", "8000"])
        self.assertEqual(options.init_path, image)
        self.assertEqual(options.first_own_socket, 9000)
        self.assertEqual(options.connect_to, (8000,))
        self.assertFalse(options.standalone)

    def test_bare_trace_selects_everything(self) -> None:
        options = parse_args(["-t", "9000"])
        self.assertEqual(options.trace_mask, 0xFFFFFFFF)
        self.assertEqual(options.first_own_socket, 9000)
        self.assertEqual(parse_args(["-x"]).extern_mask, 0x1FFF)
        self.assertEqual(parse_args(["--intern"]).intern_mask, 0xFFFFFFFF)

    def test_attached_masks_are_hexadecimal(self) -> None:
        self.assertEqual(parse_args(["-tFF"]).trace_mask, 0xFF)
        self.assertEqual(parse_args(["--trace=ff"]).trace_mask, 0xFF)
        self.assertEqual(parse_args(["--extern=1000"]).extern_mask, 0x1000)
        self.assertEqual(parse_args(["-l0x3"]).intern_mask, 3)

    def test_extensions(self) -> None:
        options = parse_args(["-d", "--id", "9", "--max-rounds", "50", "--stub-links", "c", "-v"])
        self.assertTrue(options.debug)
        self.assertEqual(options.processor_id, 9)
        self.assertEqual(options.max_rounds, 50)
        self.assertEqual(options.stub_links, 0xC)
        self.assertTrue(options.verbose)

    def test_files_keep_their_order(self) -> None:
        options = parse_args(["-f", "a.txt", "--file", "b.txt"])
        self.assertEqual(options.file_paths, (Path("a.txt"), Path("b.txt")))

    def test_help(self) -> None:
        self.assertTrue(parse_args(["-h"]).show_help)
        text = format_help()
        self.assertIn("nopsim", text)
        self.assertIn("--extern", text)

    def test_usage_errors(self) -> None:
        cases = [
            ["9000", "1", "2", "3", "4", "5"],
            ["-tZZ"],
            ["--extern=2000"],
            ["-i", "/nonexistent/boot.img"],
            ["--id", "3"],
            ["abc"],
            ["70000"],
            ["--max-rounds", "0"],
            ["--frobnicate"],
            ["-f", "1", "-f", "2", "-f", "3", "-f", "4", "-f", "5", "-f", "6", "-f", "7"],
        ]
        for argv in cases:
            with self.assertRaises(UsageError, msg=argv):
                parse_args(argv)

    def test_directory_is_not_an_init_image(self) -> None:
        with tempfile.TemporaryDirectory() as td:
            with self.assertRaises(UsageError):
                parse_args(["-i", td])


if __name__ == "__main__":
    unittest.main()
