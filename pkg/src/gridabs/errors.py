"""Exception types shared across the package.

The command-line client maps these onto exit codes: configuration problems
exit 4, infeasible discretizations exit 2, failed validation runs exit 3.
"""

from __future__ import annotations


class GridabsError(Exception):
    """Base class for all package-specific errors."""


class ScenarioError(GridabsError):
    """Scenario document failed validation; carries every violation found."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class TubeDivergenceError(GridabsError):
    """Reach-tube fixed point did not stabilize within the iteration cap."""


class InfeasibleError(GridabsError):
    """No space-time parameters satisfy the required inequalities."""

    def __init__(self, message: str, diagnostics: list[dict] | None = None):
        self.diagnostics = diagnostics or []
        super().__init__(message)


class OutOfCoverError(GridabsError):
    """Point lies outside the decomposition cover; never a silent wrong cell."""


class DecompositionTooFineError(GridabsError):
    """Requested grid would exceed the configured cell-count cap."""


class NoOutgoingTransitionsError(GridabsError):
    """Transitions are undefined from cells outside the shrunk-horizon mark."""


class PreconditionError(GridabsError):
    """A simulation was started from a state violating its contract."""


class PersistenceError(GridabsError):
    """Envelope could not be loaded (hash or schema-version mismatch)."""
