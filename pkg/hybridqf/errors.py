"""
Exception hierarchy shared by the numerical modules and the CLI.
"""
from __future__ import annotations

from typing import Optional


class HybridError(RuntimeError):
    """Base class for every error raised by hybridqf."""


class DimensionMismatchError(HybridError, ValueError):
    """Raised when vectors or matrices do not fit the phase-space dimensions."""


class InvalidParameterError(HybridError, ValueError):
    """Raised when a parameter is outside its admissible range."""


class FlowOverflowError(HybridError):
    """Raised when e^{Zt} is not representable in double precision."""


class QuadratureError(HybridError):
    """Raised when adaptive quadrature fails to reach the requested tolerance."""

    def __init__(self, message: str, achieved_error: float):
        super().__init__(f"{message} (achieved error estimate {achieved_error:.3e})")
        self.achieved_error = achieved_error


class MomentIntegrationError(HybridError):
    """Raised when the moment ODE integrator fails."""


class SingularClassicalBlockError(HybridError):
    """Raised when conditioning on a singular classical covariance block."""


class DiffusionFactorizationError(HybridError):
    """Raised when a diffusion matrix is not positive semi-definite."""


class InformationFlowInconsistency(HybridError):
    """A validated model violated the no-information-flow lemma; indicates a validator bug."""


class ConfigError(HybridError):
    """Raised for unreadable or malformed configuration files."""

    def __init__(self, message: str, location: Optional[str] = None):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


class CommandError(HybridError):
    """Raised when a CLI command cannot run on the given model."""


__all__ = [
    "HybridError",
    "DimensionMismatchError",
    "InvalidParameterError",
    "FlowOverflowError",
    "QuadratureError",
    "MomentIntegrationError",
    "SingularClassicalBlockError",
    "DiffusionFactorizationError",
    "InformationFlowInconsistency",
    "ConfigError",
    "CommandError",
]
