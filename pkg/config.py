#!/usr/bin/env python3
"""
Settings for the synchronization toolkit.

Values come from environment variables, optionally loaded from a .env file.
See env_template.txt for the full list.
"""

import os
import logging
from typing import Optional

from pydantic import BaseModel, Field, ValidationError, field_validator

from exceptions import ConfigError

# Load environment variables from .env file
try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    # dotenv not installed, continue with system env vars
    pass

logger = logging.getLogger(__name__)

ENV_PREFIX = "SYNCLAB_"


class Settings(BaseModel):
    """Runtime knobs shared by all modules"""
    log_level: str = Field("INFO", description="Logging level for the CLI")
    budget_c1: float = Field(8.0, gt=0, description="Candidate pair-walk budget factor (c1 * n)")
    budget_c2: float = Field(8.0, gt=0, description="Per-pair collapse budget factor (c2 * n)")
    budget_c3: float = Field(8.0, gt=0, description="Global collapse allowance factor (c3 * n^1.5)")
    pair_table_limit: int = Field(20000, ge=1, description="Largest n for the quadratic pair table")
    subset_limit: int = Field(16, ge=1, description="Largest n for subset-automaton search")
    clique_limit: int = Field(12, ge=1, description="Largest n for F-clique enumeration")
    enumeration_limit: int = Field(10 ** 8, ge=1, description="Most automata enumerate_all may visit")
    cluster_theta: float = Field(0.45, gt=0, lt=1, description="Exponent separating big and small clusters")
    workers: int = Field(1, ge=1, description="Default experiment worker processes")
    z: float = Field(1.96, gt=0, description="Normal quantile for Wilson intervals")

    @field_validator("log_level")
    @classmethod
    def check_log_level(cls, value: str) -> str:
        level = value.upper()
        if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"unknown log level {value}")
        return level


_FIELD_ENV = {name: f"{ENV_PREFIX}{name.upper()}" for name in Settings.model_fields}

# Settings instance
_settings: Optional[Settings] = None


def load_settings() -> Settings:
    """
    Build settings from the current environment.

    Returns:
        Validated Settings

    Raises:
        ConfigError naming the offending variable
    """
    raw = {}
    for name, env_name in _FIELD_ENV.items():
        value = os.getenv(env_name)
        if value is not None and value.strip() != "":
            raw[name] = value.strip()
    try:
        return Settings(**raw)
    except ValidationError as e:
        first = e.errors()[0]
        field = str(first["loc"][0]) if first.get("loc") else "?"
        env_name = _FIELD_ENV.get(field, field)
        logger.error(f"Invalid setting {env_name}: {first['msg']}")
        raise ConfigError(f"Invalid value for {env_name}: {first['msg']}")


def get_settings() -> Settings:
    """Get or create the process-wide settings"""
    global _settings
    if _settings is None:
        _settings = load_settings()
        logger.debug(f"Loaded settings: {_settings.model_dump()}")
    return _settings


def reset_settings() -> None:
    """Forget cached settings so the next get_settings() re-reads the environment"""
    global _settings
    _settings = None


def install_settings(settings: Settings) -> None:
    """Use the given settings process-wide; experiment workers receive the parent's this way"""
    global _settings
    _settings = settings
