from __future__ import annotations


class HarnessError(Exception):
    """Base class for harness errors."""

    exit_code = 3


class ConfigError(HarnessError):
    """Invalid configuration or usage; maps to CLI exit code 2."""

    exit_code = 2


class DataError(HarnessError):
    """Malformed or inconsistent input data; maps to CLI exit code 3."""

    exit_code = 3
