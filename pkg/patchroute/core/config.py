"""Configuration settings for the pipeline."""

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Optional

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings

from patchroute.core.exceptions import ConfigError
from patchroute.models.layout import DEFAULT_Z_ORDER, PatchSlot


# ─── Nested Parameter Groups ─────────────────────────────────────────────────


class LayoutParams(BaseModel):
    """Ratios that turn joint positions into patch corners."""

    arm_width_ratio: float = Field(default=0.45, gt=0)
    leg_width_ratio: float = Field(default=0.50, gt=0)
    neck_height_ratio: float = Field(default=0.35, gt=0)
    torso_margin_ratio: float = Field(default=0.15, gt=0)
    waist_height_ratio: float = Field(default=0.30, gt=0, lt=1)
    min_confidence: float = Field(default=0.2, ge=0, le=1)

    model_config = {"extra": "forbid", "frozen": True}


class EraseParams(BaseModel):
    """Free-form stroke mask used to erase parts of a warped garment."""

    alpha: float = Field(default=0.9, ge=0, le=1, description="Probability of erasing")
    strokes: tuple[int, int] = (1, 4)
    brush_width: tuple[int, int] = (8, 24)
    steps: tuple[int, int] = (20, 60)
    step_length: tuple[float, float] = (4.0, 16.0)
    area_bounds: tuple[float, float] = (0.05, 0.25)

    model_config = {"extra": "forbid", "frozen": True}

    @field_validator("strokes", "brush_width", "steps", "step_length", "area_bounds")
    @classmethod
    def validate_range(cls, v: tuple[float, float]) -> tuple[float, float]:
        """Ranges are inclusive, positive and ordered."""
        low, high = v
        if low <= 0 or high < low:
            raise ValueError(f"Invalid range {v}: expected 0 < low <= high")
        return v

    @field_validator("area_bounds")
    @classmethod
    def validate_area_bounds(cls, v: tuple[float, float]) -> tuple[float, float]:
        if v[1] > 1:
            raise ValueError("Area bounds are fractions of the garment mask")
        return v


class LmOptions(BaseModel):
    """Levenberg-Marquardt settings for homography refinement."""

    max_iters: int = Field(default=50, ge=1)
    tol: float = Field(default=1e-10, gt=0)
    initial_damping: float = Field(default=1e-3, gt=0)
    damping_up: float = Field(default=10.0, gt=1)
    damping_down: float = Field(default=10.0, gt=1)
    max_damping: float = Field(default=1e16, gt=0)
    cost_floor: float = Field(default=1e-16, ge=0, description="Costs at or below this are already optimal")

    model_config = {"extra": "forbid", "frozen": True}


# ─── Run Configuration ───────────────────────────────────────────────────────


class RunConfig(BaseSettings):
    """Run settings loaded from defaults, environment, config file and flags."""

    # ─── Pipeline ─────────────────────────────────────
    layout: LayoutParams = LayoutParams()
    erase: EraseParams = EraseParams()
    lm: LmOptions = LmOptions()
    canvas: tuple[int, int] = (320, 512)
    z_order: tuple[PatchSlot, ...] = DEFAULT_Z_ORDER
    refine_homographies: bool = False

    # ─── Execution ────────────────────────────────────
    seed: int = Field(default=0, ge=0)
    jobs: int = Field(default=1, ge=1)
    people_root: Optional[Path] = None
    log_level: str = "INFO"

    model_config = {
        "env_prefix": "PATCHROUTE_",
        "env_nested_delimiter": "__",
        "env_file": ".env",
        "extra": "ignore",
    }

    @field_validator("canvas", mode="before")
    @classmethod
    def parse_canvas(cls, v: Any) -> Any:
        """Accept 'WxH' strings as well as (width, height) pairs."""
        if isinstance(v, str):
            try:
                width, height = (int(part) for part in v.lower().split("x"))
            except ValueError as exc:
                raise ValueError(f"Canvas must look like WxH, got '{v}'") from exc
            return width, height
        return v

    @field_validator("canvas")
    @classmethod
    def validate_canvas(cls, v: tuple[int, int]) -> tuple[int, int]:
        if v[0] <= 0 or v[1] <= 0:
            raise ValueError("Canvas dimensions must be positive")
        return v

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        level = v.upper()
        if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"Unknown log level '{v}'")
        return level

    @model_validator(mode="after")
    def validate_z_order(self) -> "RunConfig":
        """The stitching order must name every slot exactly once."""
        if sorted(s.value for s in self.z_order) != sorted(s.value for s in PatchSlot):
            raise ValueError("z_order must list every patch slot exactly once")
        return self


# ─── Loading ─────────────────────────────────────────────────────────────────


def _merge(base: dict[str, Any], overrides: dict[str, Any]) -> dict[str, Any]:
    """Recursive dict merge; values from `overrides` win."""
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_run_config(path: Optional[Path] = None, overrides: Optional[dict[str, Any]] = None) -> RunConfig:
    """
    Build the run configuration.

    Precedence is flags (`overrides`) over the TOML file over environment
    variables over defaults.

    Raises:
        ConfigError: unreadable file, TOML syntax error or invalid values
    """
    data: dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"Cannot read config file: {exc}", path=str(path)) from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"Invalid config file: {exc}", path=str(path)) from exc
    data = _merge(data, {k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return RunConfig(**data)
    except ValidationError as exc:
        raise ConfigError("Invalid configuration", errors=exc.errors(include_url=False)) from exc
