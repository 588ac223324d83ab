# ============================================================================
# run_config.py
# ============================================================================
"""
Run configuration for every numeric check in the toolkit.

Values are layered the same way everywhere:
    DEFAULT_RUN_CONFIG  <-  jacobi_config.json (if present)  <-  explicit overrides

A malformed config file never aborts a run; it is reported and the defaults
are used instead.
"""

import json
import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

log = logging.getLogger(__name__)

CONFIG_FILE_NAME = "jacobi_config.json"

DEFAULT_RUN_CONFIG: Dict[str, Any] = {
    "samples": 64,             # sample points per numeric zero test
    "box": 2.0,                # half-width of the sampling box [-box, box]^dim
    "tol": 1e-9,               # acceptance tolerance, scaled by the local magnitude bound
    "seed": 0,                 # rng seed; identical seeds give identical reports
    "output_format": "text",   # text | structured
    "segments": 64,            # random segments probed by the singular-locus search
    "denominator_floor": 1e-6, # sample points with |den| below this are redrawn
    "max_redraws": 50,
}

OUTPUT_FORMATS = ("text", "structured")


class ConfigError(ValueError):
    """Raised when a RunConfig violates its invariants."""


@dataclass(frozen=True)
class RunConfig:
    samples: int = DEFAULT_RUN_CONFIG["samples"]
    box: float = DEFAULT_RUN_CONFIG["box"]
    tol: float = DEFAULT_RUN_CONFIG["tol"]
    seed: int = DEFAULT_RUN_CONFIG["seed"]
    output_format: str = DEFAULT_RUN_CONFIG["output_format"]
    segments: int = DEFAULT_RUN_CONFIG["segments"]
    denominator_floor: float = DEFAULT_RUN_CONFIG["denominator_floor"]
    max_redraws: int = DEFAULT_RUN_CONFIG["max_redraws"]

    def validate(self) -> "RunConfig":
        if self.samples < 1:
            raise ConfigError(f"samples must be >= 1, got {self.samples}")
        if not self.tol > 0:
            raise ConfigError(f"tol must be > 0, got {self.tol}")
        if not self.box > 0:
            raise ConfigError(f"box must be > 0, got {self.box}")
        if self.segments < 1:
            raise ConfigError(f"segments must be >= 1, got {self.segments}")
        if self.output_format not in OUTPUT_FORMATS:
            raise ConfigError(f"output_format must be one of {OUTPUT_FORMATS}")
        return self

    def rng(self, offset: int = 0) -> np.random.Generator:
        """Seeded generator; `offset` separates independent streams."""
        return np.random.default_rng([int(self.seed), int(offset)])

    def replace(self, **changes: Any) -> "RunConfig":
        merged = {**asdict(self), **{k: v for k, v in changes.items() if v is not None}}
        return RunConfig(**merged).validate()

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _read_config_file(path: Path) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            loaded = json.load(f)
    except json.JSONDecodeError as e:
        log.warning("Config decode error in %s: %s, using defaults", path, e)
        return {}
    except OSError as e:
        log.warning("Config read error for %s: %s", path, e)
        return {}

    if not isinstance(loaded, dict):
        log.warning("Invalid config format in %s, using defaults", path)
        return {}

    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(loaded) - known)
    if unknown:
        log.warning("Ignoring unknown config keys: %s", ", ".join(unknown))
    log.debug("Config loaded from %s", path)
    return {k: v for k, v in loaded.items() if k in known}


def load_run_config(path: Optional[str] = None, **overrides: Any) -> RunConfig:
    """
    Build a validated RunConfig.

    `path` names a JSON file; without it, `jacobi_config.json` in the working
    directory is used when it exists. Overrides equal to None are ignored so
    unset command-line flags fall through to the file and the defaults.
    """
    loaded: Dict[str, Any] = {}
    config_path = Path(path) if path else Path.cwd() / CONFIG_FILE_NAME
    if config_path.exists():
        loaded = _read_config_file(config_path)
    elif path:
        log.warning("Config file not found: %s, using defaults", config_path)

    explicit = {k: v for k, v in overrides.items() if v is not None}
    merged = {**DEFAULT_RUN_CONFIG, **loaded, **explicit}
    return RunConfig(**merged).validate()
