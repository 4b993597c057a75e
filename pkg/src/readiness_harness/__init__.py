"""Deployment-readiness harness for LLM and RAG pipelines."""

from .errors import ConfigError, DataError, HarnessError

__version__ = "0.1.0"

__all__ = ["ConfigError", "DataError", "HarnessError", "__version__"]
