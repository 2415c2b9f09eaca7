"""Exception hierarchy shared across the package."""

from __future__ import annotations


class SafePGError(Exception):
    """Base class for all package errors."""


class ContractViolation(SafePGError):
    """An operation was called with inputs that break its preconditions."""


class ConfigError(SafePGError):
    """Bad experiment configuration (unknown domain, malformed file, ...)."""


class DivergedTrajectory(SafePGError):
    """A rollout produced a non-finite state; carries the offending step."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"trajectory diverged at step {step}")


class NumericalFailure(SafePGError):
    """A linear solve or iterative solver failed beyond recoverable tolerance."""


class InfeasibleConstraint(SafePGError):
    """A projection subproblem has an empty feasible set; carries the task id."""

    def __init__(self, task_id: int | None, message: str | None = None):
        self.task_id = task_id
        super().__init__(message or f"infeasible constraint set for task {task_id}")


class InvariantViolation(SafePGError):
    """A runtime invariant (monotone objective, bound check, ...) failed."""
