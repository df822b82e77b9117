"""Runtime settings with environment overrides."""
from __future__ import annotations

import os

from pydantic import BaseModel, Field, ValidationError, field_validator

from primes import MAX_MODULUS_BITS, is_prime

from .exceptions import ConfigError

DEFAULT_PRIME = 2147483647

_ENV_KEYS = {
    "prime": "PSMM_PRIME",
    "enumeration_budget": "PSMM_ENUM_BUDGET",
    "workers": "PSMM_WORKERS",
    "max_point_attempts": "PSMM_POINT_ATTEMPTS",
    "cache_size": "PSMM_CACHE_SIZE",
}


class Settings(BaseModel):
    """Library-wide defaults. Every field can be overridden from the environment."""

    model_config = {"frozen": True}

    prime: int = DEFAULT_PRIME
    enumeration_budget: int = Field(default=10**7, ge=1)
    workers: int = Field(default=4, ge=1)
    max_point_attempts: int = Field(default=64, ge=1)
    cache_size: int = Field(default=128, ge=1)

    @field_validator("prime")
    @classmethod
    def _prime_is_prime(cls, value: int) -> int:
        if value.bit_length() > MAX_MODULUS_BITS or not is_prime(value):
            raise ValueError(f"{value} is not a prime of at most {MAX_MODULUS_BITS} bits")
        return value

    @classmethod
    def from_env(cls) -> "Settings":
        values = {}
        for name, key in _ENV_KEYS.items():
            raw = _get_env(key)
            if raw is not None:
                values[name] = raw
        try:
            return cls(**values)
        except ValidationError as exc:
            raise ConfigError(f"invalid PSMM_* environment setting: {exc}") from exc


def _get_env(key: str) -> str | None:
    value = os.getenv(key)
    if value is None or not value.strip():
        return None
    return value.strip()


_SETTINGS: Settings | None = None


def get_settings() -> Settings:
    """Return the process-wide settings, loading them from the environment once."""
    global _SETTINGS
    if _SETTINGS is None:
        _SETTINGS = Settings.from_env()
    return _SETTINGS


def reset_settings() -> None:
    """Forget cached settings so the next call re-reads the environment."""
    global _SETTINGS
    _SETTINGS = None
