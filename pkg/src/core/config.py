"""
Configuration management for lifemine

Two layers:
- Settings: process-wide runtime knobs read from the environment (LIFEMINE_*)
  and an optional .env file.
- PipelineConfig: a validated description of one analysis run, loaded from a
  JSON file and overridden by command line flags.
"""

import json
from pathlib import Path
from typing import Any, Dict, Literal, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from src.core.exceptions import ConfigurationError

# Load environment variables from the project .env when present
env_path = Path(__file__).parent.parent.parent / ".env"
if env_path.exists():
    load_dotenv(env_path)


class Settings(BaseSettings):
    """Runtime settings with environment variable support"""

    model_config = SettingsConfigDict(
        env_prefix="LIFEMINE_",
        case_sensitive=True,
        extra="ignore",
    )

    VERSION: str = "1.0.0"

    # Parallelism cap for k-means restarts and other embarrassingly parallel loops
    THREADS: int = Field(default=1, ge=1)
    # Forces serial execution regardless of THREADS
    DETERMINISTIC: bool = False

    LOG_LEVEL: str = "INFO"
    DEFAULT_SEED: int = 42

    @property
    def effective_threads(self) -> int:
        return 1 if self.DETERMINISTIC else self.THREADS


# Global settings instance
_settings: Optional[Settings] = None


def get_settings() -> Settings:
    """Get application settings (singleton pattern)"""
    global _settings
    if _settings is None:
        _settings = Settings()
    return _settings


def reset_settings() -> None:
    """Drop the cached settings so the environment is read again."""
    global _settings
    _settings = None


class ExtensionConfig(BaseModel):
    """User filters and check-in extension parameters."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    radius_m: float = Field(default=30.0, gt=0)
    tie_break: Literal["nearest_then_id"] = "nearest_then_id"
    min_span_days: int = Field(default=7, ge=0)
    min_checkins: int = Field(default=10, ge=0)
    # Run the spatial extension before the user filters
    extend_first: bool = False


class AnalysisConfig(BaseModel):
    """Decomposition, clustering and statistics parameters."""

    model_config = ConfigDict(extra="forbid")

    temporal_k: int = Field(default=3, ge=1)
    spatial_k: int = Field(default=10, ge=1)
    spatial_categories: Optional[int] = Field(default=None, ge=1)
    hour_tensor_k: int = Field(default=12, ge=2)
    dow_tensor_k: int = Field(default=5, ge=2)
    top_p: int = Field(default=100, ge=1)
    prune_h: int = Field(default=5, ge=0)

    nmf_tol: float = Field(default=1e-5, ge=0)
    nmf_max_iter: int = Field(default=500, ge=1)
    cp_tol: float = Field(default=1e-5, ge=0)
    cp_max_iter: int = Field(default=200, ge=1)
    cp_init: Literal["random", "singular_vector"] = "singular_vector"
    relative_tol: bool = False

    n_clusters: int = Field(default=5, ge=1)
    restarts: int = Field(default=10, ge=1)
    normalize_rows: bool = False

    top_n: int = Field(default=10, ge=1)
    dedupe_categories: bool = True
    svg: bool = False


class PipelineConfig(BaseModel):
    """Full description of a `run` invocation."""

    model_config = ConfigDict(extra="forbid")

    checkins: Optional[Path] = None
    venues: Optional[Path] = None
    users: Optional[Path] = None
    input_format: Literal["csv", "jsonl"] = "csv"
    # Generate the input with the synthetic generator instead of reading files
    synth_spec: Optional[Path] = None

    output_dir: Path = Path("report")
    seed: int = 42

    preprocess: ExtensionConfig = Field(default_factory=ExtensionConfig)
    analysis: AnalysisConfig = Field(default_factory=AnalysisConfig)

    def require_inputs(self) -> None:
        if self.synth_spec is None and self.checkins is None:
            raise ConfigurationError(
                "Pipeline needs either 'synth_spec' or 'checkins'", field="checkins"
            )

    def echo(self) -> Dict[str, Any]:
        """JSON-safe parameter echo for the run manifest."""
        return json.loads(self.model_dump_json())


def load_pipeline_config(path: Optional[Path] = None,
                         overrides: Optional[Dict[str, Any]] = None) -> PipelineConfig:
    """
    Build a PipelineConfig from a JSON file and flag overrides.

    Precedence is model defaults < JSON file < overrides. Overrides use
    dotted keys for nested blocks, e.g. ``{"preprocess.radius_m": 25}``.

    Raises:
        ConfigurationError: unreadable file or values outside documented ranges
    """
    data: Dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigurationError(f"Cannot read config {path}: {e}", field="config")
        if not isinstance(data, dict):
            raise ConfigurationError(f"Config {path} must hold a JSON object", field="config")
        # a run manifest carries the full config of its run
        if "lifemine_version" in data and isinstance(data.get("config"), dict):
            data = data["config"]
        base = Path(path).parent
        for key in ("checkins", "venues", "users", "synth_spec"):
            if data.get(key) and not Path(data[key]).is_absolute():
                data[key] = str((base / data[key]).resolve())

    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        target = data
        *parents, leaf = dotted.split(".")
        for parent in parents:
            target = target.setdefault(parent, {})
        target[leaf] = value

    try:
        return PipelineConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid pipeline configuration: {e}", field="config")
