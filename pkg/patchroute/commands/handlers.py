"""Subcommand handlers: each turns parsed arguments into a pipeline call and an exit status."""

import argparse
import asyncio
import logging
from pathlib import Path

from patchroute.services.batch_service import BatchService
from patchroute.services.pipeline_service import PipelineService

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_JOB_FAILED = 1
EXIT_ERROR = 2


# ─── Single Items ────────────────────────────────────────────────────────────


def cmd_decompose(args: argparse.Namespace, service: PipelineService) -> int:
    patches = service.decompose(args.person, Path(args.out_archive), args.category)
    print(f"{args.out_archive}: {patches.category.value}, {len(patches.patches)} slots")
    return EXIT_OK


def cmd_retarget(args: argparse.Namespace, service: PipelineService) -> int:
    warped = service.retarget(
        Path(args.archive), args.target, Path(args.out_dir), erase_seed=args.erase_seed, alpha=args.alpha
    )
    print(f"{args.out_dir}: {int(warped.mask.sum())} garment pixels")
    return EXIT_OK


def cmd_masks(args: argparse.Namespace, service: PipelineService) -> int:
    service.masks(
        Path(args.g_t),
        Path(args.m_t),
        Path(args.parsing),
        Path(args.out_dir),
        category=args.category,
        labels=Path(args.labels) if args.labels else None,
    )
    print(f"{args.out_dir}: masks written")
    return EXIT_OK


def cmd_edit(args: argparse.Namespace, service: PipelineService) -> int:
    bundle = service.edit(
        args.target,
        Path(args.script),
        Path(args.out_dir),
        upper=Path(args.upper) if args.upper else None,
        lower=Path(args.lower) if args.lower else None,
    )
    order = bundle.dressing_order.value if bundle.dressing_order is not None else "none"
    print(f"{args.out_dir}: dressing order {order}")
    return EXIT_OK


def cmd_inspect(args: argparse.Namespace, service: PipelineService) -> int:
    print(service.inspect(Path(args.path)))
    return EXIT_OK


# ─── Batch ───────────────────────────────────────────────────────────────────


def cmd_batch(args: argparse.Namespace, service: PipelineService) -> int:
    summary = asyncio.run(BatchService(service).run(Path(args.manifest), Path(args.out_root)))
    print(f"{summary.total} jobs: {summary.succeeded} succeeded, {summary.failed} failed")
    return EXIT_OK if summary.failed == 0 else EXIT_JOB_FAILED
