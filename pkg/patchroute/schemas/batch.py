"""Pydantic schemas for batch manifests and per-job status records."""

import re
from enum import Enum
from typing import Any, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator


class JobOperation(str, Enum):
    DECOMPOSE = "decompose"
    WARP = "warp"


class JobStatusEnum(str, Enum):
    SUCCEEDED = "succeeded"
    FAILED = "failed"


class BatchJob(BaseModel):
    """One JSON line of a batch manifest."""

    id: str = Field(..., min_length=1, pattern=r"^[A-Za-z0-9._-]+$")
    operation: JobOperation
    source: str = Field(..., min_length=1, description="Source person id or directory")
    target: Optional[str] = Field(default=None, description="Target person id or directory (warp only)")
    category: Literal["auto", "upper", "lower", "dress"] = "auto"
    erase: bool = Field(default=True, description="Apply random erasing to the warp")

    model_config = {"extra": "forbid"}

    @field_validator("id")
    @classmethod
    def validate_id(cls, v: str) -> str:
        """`line-N` ids name unparseable manifest lines."""
        if re.fullmatch(r"line-\d+", v):
            raise ValueError("ids of the form line-N are reserved")
        return v

    @model_validator(mode="after")
    def validate_target(self) -> "BatchJob":
        """Warp jobs need a target person."""
        if self.operation is JobOperation.WARP and not self.target:
            raise ValueError("warp jobs need a target")
        return self


class JobStatus(BaseModel):
    """status.json written for every job."""

    id: str
    operation: Optional[JobOperation] = None
    status: JobStatusEnum
    outputs: list[str] = Field(default_factory=list)
    error: Optional[dict[str, Any]] = None


class BatchSummary(BaseModel):
    total: int
    succeeded: int
    failed: int
