"""Configuration management for mtp2-ising."""

import os
from enum import Enum
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field

# Env file location
ENV_FILE_PATH = Path.home() / ".config" / "mtp2-ising" / "env"


def load_env_file(path: Path | None = None) -> dict[str, str]:
    """Load key=value pairs from env file. Returns empty dict if missing/unreadable."""
    path = path or ENV_FILE_PATH
    result: dict[str, str] = {}
    try:
        if path.exists():
            for line in path.read_text().splitlines():
                line = line.strip()
                if line and not line.startswith("#") and "=" in line:
                    key, _, value = line.partition("=")
                    result[key.strip()] = value.strip()
    except (OSError, PermissionError):
        pass
    return result


class Setting(str, Enum):
    """Configurable settings."""

    MAX_DIM = "max_dim"
    CERTIFY_MAX_DIM = "certify_max_dim"
    GENERAL_MAX_DIM = "general_max_dim"
    EPSILON = "epsilon"
    MAX_SWEEPS = "max_sweeps"
    TOL_PRIMAL = "tol_primal"
    TOL_DUAL = "tol_dual"
    TOL_SLACK = "tol_slack"


class Config:
    """
    Application configuration.

    Values come from environment variables, then the env file, then defaults.
    """

    ENV_VARS = {
        Setting.MAX_DIM: "MTP2_MAX_DIM",
        Setting.CERTIFY_MAX_DIM: "MTP2_CERTIFY_MAX_DIM",
        Setting.GENERAL_MAX_DIM: "MTP2_GENERAL_MAX_DIM",
        Setting.EPSILON: "MTP2_EPSILON",
        Setting.MAX_SWEEPS: "MTP2_MAX_SWEEPS",
        Setting.TOL_PRIMAL: "MTP2_TOL_PRIMAL",
        Setting.TOL_DUAL: "MTP2_TOL_DUAL",
        Setting.TOL_SLACK: "MTP2_TOL_SLACK",
    }

    DEFAULTS: dict[Setting, int | float] = {
        Setting.MAX_DIM: 20,
        Setting.CERTIFY_MAX_DIM: 10,
        Setting.GENERAL_MAX_DIM: 8,
        Setting.EPSILON: 1e-10,
        Setting.MAX_SWEEPS: 10_000,
        Setting.TOL_PRIMAL: 1e-8,
        Setting.TOL_DUAL: 1e-7,
        Setting.TOL_SLACK: 1e-7,
    }

    DESCRIPTIONS = {
        Setting.MAX_DIM: "Largest d for dense 2^d tables",
        Setting.CERTIFY_MAX_DIM: "Largest d for imset cone certificates",
        Setting.GENERAL_MAX_DIM: "Largest d for the general MTP2 solver",
        Setting.EPSILON: "IPS convergence precision",
        Setting.MAX_SWEEPS: "IPS sweep cap",
        Setting.TOL_PRIMAL: "Primal feasibility tolerance",
        Setting.TOL_DUAL: "Dual feasibility tolerance",
        Setting.TOL_SLACK: "Complementary slackness tolerance",
    }

    def _raw(self, setting: Setting) -> tuple[str | None, str]:
        """Return (raw value, source) for a setting."""
        env_var = self.ENV_VARS[setting]

        # 1. Environment variable (highest priority)
        if value := os.environ.get(env_var):
            return value, "env"

        # 2. Env file
        if value := load_env_file().get(env_var):
            return value, "file"

        return None, "default"

    def get(self, setting: Setting) -> int | float:
        """Get a typed setting value, falling back to the default on bad input."""
        default = self.DEFAULTS[setting]
        raw, _ = self._raw(setting)
        if raw is None:
            return default
        try:
            return type(default)(float(raw)) if isinstance(default, int) else float(raw)
        except ValueError:
            return default

    @property
    def max_dim(self) -> int:
        return int(self.get(Setting.MAX_DIM))

    @property
    def certify_max_dim(self) -> int:
        return int(self.get(Setting.CERTIFY_MAX_DIM))

    @property
    def general_max_dim(self) -> int:
        return int(self.get(Setting.GENERAL_MAX_DIM))

    def get_setting_status(self, setting: Setting) -> dict[str, Any]:
        """Get value and provenance for a setting."""
        _, source = self._raw(setting)
        return {
            "setting": setting.value,
            "env_var": self.ENV_VARS[setting],
            "value": self.get(setting),
            "source": source,
            "description": self.DESCRIPTIONS[setting],
        }

    def get_env_var_help(self) -> str:
        """Get help text listing every environment variable."""
        lines = ["Environment variables (env > ~/.config/mtp2-ising/env > default):\n"]

        for setting in Setting:
            status = self.get_setting_status(setting)
            lines.append(f"  {status['env_var']}={status['value']}  [{status['source']}]")
            lines.append(f"    {status['description']}")
            lines.append("")

        return "\n".join(lines)


class Tolerances(BaseModel):
    """KKT certificate tolerances."""

    model_config = ConfigDict(frozen=True)

    primal: float = Field(default=1e-8, gt=0)
    dual: float = Field(default=1e-7, gt=0)
    slack: float = Field(default=1e-7, gt=0)

    @classmethod
    def from_config(cls) -> "Tolerances":
        return cls(
            primal=config.get(Setting.TOL_PRIMAL),
            dual=config.get(Setting.TOL_DUAL),
            slack=config.get(Setting.TOL_SLACK),
        )


class Command(str, Enum):
    """CLI subcommands that run through `run()`."""

    FIT = "fit"
    FIT_GENERAL = "fit-general"
    FIT_SYMMETRIC = "fit-symmetric"
    CHECK_MTP2 = "check-mtp2"
    CHECK_EXISTENCE = "check-existence"
    CERTIFY = "certify"


class SampleFormat(str, Enum):
    """Sample file formats."""

    PM1 = "pm1"
    ZERO_ONE = "01"
    COUNTS = "counts"


class RunConfig(BaseModel):
    """Everything one CLI invocation needs."""

    model_config = ConfigDict(frozen=True)

    command: Command
    input_path: Path
    input_format: SampleFormat | None = None
    dim: int | None = Field(default=None, ge=1)
    graph_path: Path | None = None
    table_path: Path | None = None
    epsilon: float = Field(default=1e-10, gt=0)
    max_sweeps: int = Field(default=10_000, ge=1)
    tolerances: Tolerances = Field(default_factory=Tolerances)
    output_path: Path | None = None
    symmetric: bool = False
    general: bool = False
    likelihood_ratio: bool = False
    output_json: bool = False
    seed: int | None = None


# Global config instance
config = Config()
