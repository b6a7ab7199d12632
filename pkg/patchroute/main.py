"""Command-line entry point."""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, NoReturn, Optional, Sequence

from patchroute import __version__
from patchroute.commands import handlers
from patchroute.core.config import load_run_config
from patchroute.core.diagnostics import JsonFormatter, emit_diagnostic
from patchroute.core.exceptions import PatchRouteError
from patchroute.repositories.person_repository import PersonRepository
from patchroute.services.pipeline_service import PipelineService

CATEGORIES = ("auto", "upper", "lower", "dress")


# ─── Argument Parser ──────────────────────────────────────────────────────────


class DiagnosticParser(argparse.ArgumentParser):
    """Argument parser whose usage errors are JSON diagnostics on stderr."""

    def error(self, message: str) -> NoReturn:
        emit_diagnostic(
            {"code": "UsageError", "message": message, "details": {"usage": self.format_usage().strip()}},
            sys.stderr,
        )
        self.exit(handlers.EXIT_ERROR)


def build_parser() -> argparse.ArgumentParser:
    # Subcommands that erase also accept --alpha after their name; it wins over the global flag.
    erase = DiagnosticParser(add_help=False)
    erase.add_argument("--alpha", type=float, default=argparse.SUPPRESS, help="Erase probability")

    p = DiagnosticParser(prog="patchroute", description="Patch-routed garment deformation pipeline")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    p.add_argument("--config", type=Path, help="TOML run configuration")
    p.add_argument("--seed", type=int)
    p.add_argument("--alpha", type=float, help="Erase probability")
    p.add_argument("--canvas", help="Expected canvas as WxH, e.g. 320x512")
    p.add_argument("--jobs", type=int, help="Parallel batch jobs")
    p.add_argument("--people-root", type=Path, help="Directory resolving person ids")
    p.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("decompose", help="Decompose a person's garment into a patch archive")
    s.add_argument("person", help="Person directory, manifest or id")
    s.add_argument("out_archive", help="Archive path (.zip for a zip file, else a directory)")
    s.add_argument("--category", choices=CATEGORIES, default="auto")
    s.set_defaults(handler=handlers.cmd_decompose)

    s = sub.add_parser("retarget", parents=[erase], help="Warp an archive onto a target person")
    s.add_argument("archive")
    s.add_argument("target", help="Target person directory, manifest or id")
    s.add_argument("out_dir")
    s.add_argument("--erase-seed", type=int)
    s.set_defaults(handler=handlers.cmd_retarget)

    s = sub.add_parser("masks", help="Garment, aligned and misaligned masks of a warped garment")
    s.add_argument("g_t", help="Warped garment PNG")
    s.add_argument("m_t", help="Warped garment mask PNG")
    s.add_argument("parsing", help="Target parsing PNG")
    s.add_argument("out_dir")
    s.add_argument("--category", choices=CATEGORIES, default="auto")
    s.add_argument("--labels", help="Label table JSON for the parsing")
    s.set_defaults(handler=handlers.cmd_masks)

    s = sub.add_parser("edit", help="Apply an edit script to a try-on bundle")
    s.add_argument("target", help="Target person directory, manifest or id")
    s.add_argument("script", help="Edit script JSON")
    s.add_argument("out_dir")
    s.add_argument("--upper", help="Upper garment archive or person directory")
    s.add_argument("--lower", help="Lower garment archive or person directory")
    s.set_defaults(handler=handlers.cmd_edit)

    s = sub.add_parser("batch", parents=[erase], help="Run a JSON-lines job manifest")
    s.add_argument("manifest")
    s.add_argument("out_root")
    s.set_defaults(handler=handlers.cmd_batch)

    s = sub.add_parser("inspect", help="Summarize an archive or a person")
    s.add_argument("path")
    s.set_defaults(handler=handlers.cmd_inspect)
    return p


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    """Flags that override the configuration file."""
    overrides: dict[str, Any] = {
        "seed": args.seed,
        "canvas": args.canvas,
        "jobs": args.jobs,
        "people_root": args.people_root,
        "log_level": args.log_level,
    }
    if args.alpha is not None:
        overrides["erase"] = {"alpha": args.alpha}
    return overrides


# ─── Logging Configuration ────────────────────────────────────────────────────


def configure_logging(level: str) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(JsonFormatter())
    logging.basicConfig(level=level.upper(), handlers=[handler], force=True)


# ─── Entry Point ──────────────────────────────────────────────────────────────


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level or "INFO")
    try:
        config = load_run_config(args.config, _overrides(args))
        configure_logging(config.log_level)
        service = PipelineService(config, PersonRepository(config.people_root))
        return args.handler(args, service)
    except PatchRouteError as err:
        emit_diagnostic(err.to_dict(), sys.stderr)
        return handlers.EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
