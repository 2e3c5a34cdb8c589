"""Computational phenotyping from irregular lab time series."""

from ._pheno import *  # noqa: F401,F403
from ._pheno import ParameterError, PhenoError

__all__ = [name for name in dir() if not name.startswith("_")]
