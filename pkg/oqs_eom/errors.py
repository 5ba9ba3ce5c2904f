"""
oqs_eom/errors.py
Exception hierarchy; every class carries the CLI exit code it maps to.
"""

from typing import Optional


class OQSError(Exception):
    """Base class for all toolkit errors"""

    exit_code = 1


class ConfigError(OQSError):
    """Malformed or semantically invalid run configuration"""

    exit_code = 2

    def __init__(self, message: str, field: Optional[str] = None,
                 line: Optional[int] = None, column: Optional[int] = None):
        self.field = field
        self.line = line
        self.column = column
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}, column {column}")
        prefix = f"[{'; '.join(where)}] " if where else ""
        super().__init__(f"{prefix}{message}")


class DimensionError(OQSError, ValueError):
    exit_code = 2


class InvalidStateError(OQSError, ValueError):
    """Operator fails a declared property (hermiticity, trace, positivity, Q-space)"""

    exit_code = 2


class NumericalError(OQSError):
    exit_code = 3


class InvalidFrequencyError(NumericalError, ValueError):
    """Evaluation requested on or below the real axis"""


class NearPoleError(NumericalError):
    """Restricted solve too close to the spectrum of the propagated operator"""

    def __init__(self, z: complex, condition: float, what: str = "z - L_Q"):
        self.z = complex(z)
        self.condition = float(condition)
        self.what = what
        super().__init__(
            f"near-pole at z = {self.z.real:.6g}{self.z.imag:+.6g}i: "
            f"cond({what}) = {self.condition:.3e}"
        )


class SolverError(NumericalError):
    pass


class NyquistError(NumericalError, ValueError):
    pass


class EmptyZeroClusterError(NumericalError):
    """No eigenvalue of L(z) near zero; probability conservation is broken upstream"""


class DefectiveSpectrumError(NumericalError):
    pass


class AcceptanceError(OQSError):
    """A verification residual exceeded its acceptance threshold"""

    exit_code = 4
