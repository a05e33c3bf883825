"""Exception hierarchy shared by the solvers and the command line front end."""

from typing import Any, Dict, Optional


class NonlocalMaxwellError(Exception):
    """Base class for every error raised by nonlocal_maxwell."""


class InvalidConfigError(NonlocalMaxwellError, ValueError):
    """A parameter, file or schema is outside its admissible range (CLI exit code 1)."""


class SolverError(NonlocalMaxwellError, RuntimeError):
    """A solver could not deliver its result (CLI exit code 2)."""


class NonConvergenceError(SolverError):
    """An iteration stopped before reaching its tolerance.

    Args:
        message: Human readable reason
        report: Partial report of the failed run, serialized into the CLI output
    """

    def __init__(self, message: str, report: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.report = report or {}


class InfimumNotAttainedError(SolverError):
    """A minimizer was requested for a kernel whose least energy level is not attained."""
