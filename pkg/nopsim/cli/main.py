from __future__ import annotations

import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, BinaryIO, Callable, Dict, List, Optional, TextIO, Tuple

from tqdm import tqdm

from nopsim.asm.image import InitImageError, read_image
from nopsim.cli.options import CliOptions, UsageError, format_help, parse_args
from nopsim.config.sim_config import ConfigError, SimulatorConfig, load_simulator_config
from nopsim.cpu.processor import BreakHandler, HaltReason, Processor
from nopsim.link.transport import LinkError, ProgressCallback, bring_up
from nopsim.link.wire import LinkProtocolError
from nopsim.switch.peripheral import standard_lines
from nopsim.trace import Tracer, configure_trace_logger
from nopsim.util.fs import atomic_write_text
from nopsim.util.yaml_emit import render_yaml_with_header

__all__ = ["InitImageError", "load_init", "main", "merge_settings", "run_simulation"]

logger = logging.getLogger("nopsim")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FATAL = 2
EXIT_FAULTED = 3


class _CommandProgress:
    def __init__(self, label: str) -> None:
        self._enabled = sys.stderr.isatty()
        self._bar = tqdm(
            total=0,
            unit="link",
            dynamic_ncols=True,
            leave=False,
            disable=not self._enabled,
            desc=label,
        )

    def callback(self, event: str, payload: Dict[str, Any]) -> None:
        if not self._enabled:
            return

        if event == "set_total":
            total = payload.get("total")
            if isinstance(total, int) and total >= 0:
                self._bar.total = total
                self._bar.refresh()
            return

        if event == "step":
            link = payload.get("link")
            peer = payload.get("peer")
            if isinstance(link, int):
                self._bar.set_description_str(f"link {link} up (peer {peer})")
            self._bar.update(1)
            return

        if event == "complete":
            self._bar.total = self._bar.n
            self._bar.refresh()

    def close(self) -> None:
        self._bar.close()


@dataclass(frozen=True)
class RunSettings:
    processor_id: int
    debug: bool
    trace_mask: int
    intern_mask: int
    extern_mask: int
    files: Tuple[Path, ...]
    stub_links: int
    host: str
    connect_timeout: float
    max_rounds: Optional[int]
    routes: Dict[int, int] = field(default_factory=dict)
    line_destinations: Dict[int, int] = field(default_factory=dict)


def _pick(cli_value: Any, config_value: Any) -> Any:
    return config_value if cli_value is None else cli_value


def merge_settings(options: CliOptions, config: SimulatorConfig) -> RunSettings:
    """Command-line options win over the configuration file."""
    return RunSettings(
        processor_id=_pick(options.processor_id, config.processor_id),
        debug=options.debug or config.debug,
        trace_mask=_pick(options.trace_mask, config.trace_mask),
        intern_mask=_pick(options.intern_mask, config.intern_mask),
        extern_mask=_pick(options.extern_mask, config.extern_mask),
        files=options.file_paths or tuple(Path(p) for p in config.files),
        stub_links=_pick(options.stub_links, config.stub_links),
        host=config.host,
        connect_timeout=config.connect_timeout,
        max_rounds=_pick(options.max_rounds, config.max_rounds),
        routes=dict(config.routes),
        line_destinations=dict(config.line_destinations),
    )


def load_init(path: Path) -> List[int]:
    """Boot message words of an init image (header skipped, END not included)."""
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise InitImageError(f"Cannot read init image {path}: {exc}") from exc
    try:
        return read_image(data)
    except InitImageError as exc:
        raise InitImageError(f"{path}: {exc}") from exc


def _format_snapshot(snapshot: Dict[str, Any]) -> str:
    tos = snapshot["tos"]
    return (
        f"BREAK u{snapshot['unit']} t{snapshot['thread']} ip {snapshot['ip']:04x} sp {snapshot['sp']:04x} "
        f"tos {'--------' if tos is None else f'{tos:08x}'} lc {snapshot['lc0']:04x}..{snapshot['lc1']:04x} "
        f"ld {snapshot['ld0']:04x}..{snapshot['ld1']:04x} exc {snapshot['exc']:08x} cycles {snapshot['cycles']}"
    )


def terminal_break_handler(out: TextIO, opener: Callable[[], TextIO] = lambda: open("/dev/tty", "r")) -> BreakHandler:
    def handle(snapshot: Dict[str, Any]) -> None:
        print(_format_snapshot(snapshot), file=out, flush=True)
        try:
            with opener() as tty:
                print("press Enter to continue", file=out, flush=True)
                tty.readline()
        except OSError:
            logger.warning("No controlling terminal; continuing after BREAK.")

    return handle


def run_simulation(
    options: CliOptions,
    config: SimulatorConfig,
    stdin: Optional[BinaryIO],
    stdout: Optional[BinaryIO],
    progress_callback: Optional[ProgressCallback] = None,
    break_handler: Optional[BreakHandler] = None,
    threaded_stdin: bool = True,
) -> Dict[str, Any]:
    settings = merge_settings(options, config)

    tracer = Tracer(settings.processor_id, settings.trace_mask, settings.intern_mask, settings.extern_mask)
    if tracer.enabled:
        configure_trace_logger()

    lines = standard_lines(stdin, stdout, settings.files, threaded_stdin=threaded_stdin)
    processor = Processor(settings.processor_id, lines, tracer, settings.debug, break_handler)
    try:
        for processor_id, link in settings.routes.items():
            processor.switch.set_route(processor_id, link)
        for line, destination in settings.line_destinations.items():
            processor.switch.lines[line].inbound_dest = destination
        if options.init_path is not None:
            processor.deliver_init(load_init(options.init_path))

        links = bring_up(
            options.first_own_socket,
            options.connect_to,
            settings.processor_id,
            host=settings.host,
            stub_mask=settings.stub_links,
            connect_timeout=settings.connect_timeout,
            progress_callback=progress_callback,
        )
        for index, link in enumerate(links):
            processor.switch.attach_link(index, link)

        try:
            halt = processor.run(max_rounds=settings.max_rounds)
        except KeyboardInterrupt:
            halt = HaltReason.INTERRUPTED

        report_path: Optional[str] = None
        if options.report_path is not None:
            atomic_write_text(
                options.report_path,
                render_yaml_with_header(
                    processor.halt_report(halt),
                    [
                        "NOPSIM HALT REPORT. GENERATED FILE.",
                        "Registers of every thread that ran; overwritten by the next run with --report.",
                    ],
                ),
            )
            report_path = str(options.report_path)

        return {
            "halt": halt.value,
            "time": processor.time,
            "rounds": processor.rounds,
            "faulted": [(unit, ctx.number, ctx.stop_reason.name) for unit, ctx in processor.faulted_threads() if ctx.stop_reason],
            "deadlocks": processor.deadlock_report() if settings.debug else [],
            "report_path": report_path,
        }
    finally:
        processor.close()


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )


def main(argv: Optional[List[str]] = None) -> int:
    try:
        options = parse_args(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        print(f"nopsim: {exc}", file=sys.stderr)
        print("Try 'nopsim --help'.", file=sys.stderr)
        return EXIT_USAGE
    if options.show_help:
        print(format_help())
        return EXIT_OK

    _configure_logging(options.verbose)
    progress = _CommandProgress("links")
    try:
        config = load_simulator_config(options.config_path)
        result = run_simulation(
            options,
            config,
            stdin=sys.stdin.buffer,
            stdout=sys.stdout.buffer,
            progress_callback=progress.callback,
            break_handler=terminal_break_handler(sys.stderr),
        )
    except (ConfigError, InitImageError, LinkError, LinkProtocolError, OSError, ValueError) as exc:
        progress.close()
        print(f"nopsim: {exc}", file=sys.stderr)
        return EXIT_FATAL
    progress.close()

    for line in result["deadlocks"]:
        print(f"nopsim: blocked: {line}", file=sys.stderr)
    for unit, thread, reason in result["faulted"]:
        print(f"nopsim: u{unit} t{thread} faulted: {reason}", file=sys.stderr)
    if result["report_path"]:
        print(f"nopsim: report written to {result['report_path']}", file=sys.stderr)
    return EXIT_FAULTED if result["faulted"] else EXIT_OK
