"""Service layer for JSON-lines batch manifests."""

import asyncio
import json
import logging
import zlib
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import ValidationError

from patchroute.core.exceptions import MalformedJsonError, PatchRouteError
from patchroute.repositories import artifact_repository
from patchroute.schemas.batch import BatchJob, BatchSummary, JobOperation, JobStatus, JobStatusEnum
from patchroute.services import warp_service
from patchroute.services.pipeline_service import PipelineService

logger = logging.getLogger(__name__)

STATUS_FILE = "status.json"
ARCHIVE_FILE = "patches.zip"


def job_seed(base_seed: int, job_id: str) -> int:
    """Erase seed of one job; depends only on the run seed and the job id."""
    return int(np.random.SeedSequence([base_seed, zlib.crc32(job_id.encode("utf-8"))]).generate_state(1)[0])


def read_manifest(path: Path) -> list[tuple[str, BatchJob | PatchRouteError]]:
    """
    Parse a manifest into (record id, job or parse error) pairs, skipping blank lines.

    A line that cannot be parsed, or repeats an earlier job id, is recorded
    as `line-N` (1-based) so the run can continue and report it.
    """
    text = artifact_repository.read_bytes(path).decode("utf-8", errors="replace")
    entries: list[tuple[str, BatchJob | PatchRouteError]] = []
    seen: dict[str, int] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            job = BatchJob.model_validate(json.loads(line))
        except json.JSONDecodeError as exc:
            entries.append((f"line-{number}", MalformedJsonError(f"Invalid JSON: {exc}", line=number)))
            continue
        except ValidationError as exc:
            entries.append(
                (
                    f"line-{number}",
                    MalformedJsonError(
                        "Job does not match its schema",
                        line=number,
                        errors=exc.errors(include_url=False, include_context=False),
                    ),
                )
            )
            continue
        if job.id in seen:
            entries.append(
                (
                    f"line-{number}",
                    MalformedJsonError("Duplicate job id", line=number, id=job.id, first_line=seen[job.id]),
                )
            )
            continue
        seen[job.id] = number
        entries.append((job.id, job))
    return entries


class BatchService:
    """Runs manifest jobs through the pipeline with bounded parallelism."""

    def __init__(self, pipeline: PipelineService) -> None:
        self._pipeline = pipeline

    # ─── Single Job ──────────────────────────────────────────────────

    def run_job(self, job: BatchJob, out_dir: Path) -> list[str]:
        """Run one job synchronously; returns the output file names."""
        pipeline = self._pipeline
        if job.operation is JobOperation.DECOMPOSE:
            pipeline.decompose(job.source, out_dir / ARCHIVE_FILE, job.category)
            return [ARCHIVE_FILE]

        source = pipeline.load_person(job.source)
        target = pipeline.load_person(job.target)
        category = pipeline.resolve_category(source.parsing, job.category)
        patches = warp_service.decompose_garment(
            source.image, source.parsing, source.pose, category, pipeline.config.layout
        )
        warped, homographies = pipeline.warp(
            patches, target, erase_seed=job_seed(pipeline.config.seed, job.id), erase=job.erase
        )
        return pipeline.write_warp(out_dir, warped, homographies)

    # ─── Batch Processing ────────────────────────────────────────────

    async def run(self, manifest: Path, out_root: Path, jobs: Optional[int] = None) -> BatchSummary:
        """
        Process every manifest entry concurrently, at most `jobs` at a time.

        Every entry gets `<out_root>/<id>/status.json`; a failing job never
        stops the others.
        """
        out_root = Path(out_root)
        entries = read_manifest(manifest)
        limit = asyncio.Semaphore(jobs or self._pipeline.config.jobs)

        async def process_single_job(record_id: str, entry: BatchJob | PatchRouteError) -> bool:
            """Process one entry, returning True if it succeeded."""
            out_dir = out_root / record_id
            status = JobStatus(id=record_id, status=JobStatusEnum.FAILED)
            async with limit:
                if isinstance(entry, PatchRouteError):
                    status.error = entry.to_dict()
                else:
                    status.operation = entry.operation
                    try:
                        status.outputs = await asyncio.to_thread(self.run_job, entry, out_dir)
                        status.status = JobStatusEnum.SUCCEEDED
                    except PatchRouteError as err:
                        status.error = err.to_dict()
                    except Exception as err:
                        logger.exception("Job raised an unexpected error", extra={"job": record_id})
                        status.error = {"code": type(err).__name__, "message": str(err), "details": {}}
                if status.error is not None:
                    logger.warning("Job failed", extra={"job": record_id, "error": status.error})
                else:
                    logger.info("Job succeeded", extra={"job": record_id})
                artifact_repository.atomic_write_bytes(
                    out_dir / STATUS_FILE, artifact_repository.dump_json(status.model_dump(mode="json"))
                )
            return status.status is JobStatusEnum.SUCCEEDED

        results = await asyncio.gather(
            *[process_single_job(record_id, entry) for record_id, entry in entries],
            return_exceptions=True,
        )
        for (record_id, _), result in zip(entries, results):
            if isinstance(result, BaseException):
                logger.error("Job crashed", extra={"job": record_id, "error": repr(result)})

        succeeded = sum(1 for result in results if result is True)
        summary = BatchSummary(total=len(entries), succeeded=succeeded, failed=len(entries) - succeeded)
        logger.info("Batch finished", extra=summary.model_dump())
        return summary
