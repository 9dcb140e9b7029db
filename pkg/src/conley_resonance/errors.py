"""Exception hierarchy.

Every error carries a short machine-readable ``kind`` so the command line
runner can map failures onto exit codes and report fields.
"""

from __future__ import annotations


class ResonanceError(Exception):
    kind = "error"


class InvalidArgument(ResonanceError, ValueError):
    kind = "invalid-argument"


class InvalidOperator(ResonanceError, ValueError):
    kind = "invalid-operator"


class IllPosedBackwardFlow(ResonanceError, ValueError):
    kind = "ill-posed-backward-flow"


class UnsupportedRealization(ResonanceError):
    kind = "unsupported-realization"


class InsufficientMetadata(ResonanceError):
    kind = "insufficient-metadata"


class HypothesisViolated(ResonanceError):
    """A standing hypothesis on the nonlinearity failed on a sample.

    ``hypothesis`` names the failed assumption (``"E2"``, ``"E4"``) and
    ``witness`` holds the offending sample for the report.
    """

    kind = "hypothesis-violated"

    def __init__(self, hypothesis: str, message: str, witness: dict | None = None):
        super().__init__(message)
        self.hypothesis = hypothesis
        self.witness = dict(witness or {})

    @property
    def tag(self) -> str:
        return f"hypothesis-{self.hypothesis}-violated"


class ConditionNotVerified(ResonanceError):
    kind = "condition-not-verified"


class BlowUpDetected(ResonanceError, FloatingPointError):
    kind = "blow-up-detected"

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


class Inapplicable(ResonanceError):
    kind = "inapplicable"


class NonhyperbolicOrigin(ResonanceError):
    kind = "nonhyperbolic-origin"


class BlockVerificationFailed(ResonanceError):
    kind = "block-verification-failed"

    def __init__(self, message: str, witnesses: list | None = None):
        super().__init__(message)
        self.witnesses = list(witnesses or [])


class ConfigError(ResonanceError):
    """Configuration problem, optionally pinned to a line of the file."""

    kind = "config-error"

    def __init__(self, message: str, line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line
