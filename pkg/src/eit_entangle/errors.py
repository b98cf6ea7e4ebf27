"""Exception hierarchy.

Every error carries a short machine-readable ``tag`` and the process exit
code the command-line tool uses when it escapes to the top level.
"""

from __future__ import annotations


class EITError(Exception):
    tag = "numerical-failure"
    exit_code = 3


class ConfigError(EITError, ValueError):
    tag = "config"
    exit_code = 2

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


# numerics
class NotSquareError(EITError, ValueError):
    tag = "not-square"


class NonFiniteError(EITError, ValueError):
    tag = "non-finite"


class HermiticityError(EITError, ValueError):
    tag = "not-hermitian"


class ConvergenceError(EITError, ArithmeticError):
    tag = "no-convergence"


class KernelError(EITError, ArithmeticError):
    tag = "kernel"


class AmbiguousKernelError(KernelError):
    tag = "ambiguous-kernel"


class NoKernelError(KernelError):
    tag = "no-kernel"


# model
class ParameterError(EITError, ValueError):
    tag = "bad-parameter"


class LabelingAmbiguityError(EITError, ValueError):
    tag = "labeling-ambiguity"


class DimensionError(EITError, ValueError):
    tag = "dimension-mismatch"


# spectral
class TrackDiscontinuityError(EITError):
    tag = "track-discontinuity"

    def __init__(self, message: str, index: int):
        self.index = index
        super().__init__(message)

    def __reduce__(self):
        return type(self), (self.args[0], self.index)


class PairIdentificationError(EITError):
    tag = "pair-identification"


class BracketingError(EITError):
    tag = "resonance-bracketing"


# dynamics
class StateError(EITError, ValueError):
    tag = "invalid-state"


class TruncationError(EITError):
    tag = "tail-breach"


class PositivityError(EITError):
    tag = "positivity-breach"


class StepSizeError(EITError, ValueError):
    tag = "step-size"


class NoSteadyStateError(EITError):
    tag = "no-steady-state"
