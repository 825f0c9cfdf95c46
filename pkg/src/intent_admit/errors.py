"""Exception types shared across the package."""


class IntentAdmitError(Exception):
    """Base class for all package errors."""


class ConfigurationError(IntentAdmitError):
    """Invalid configuration value, window spec, or experiment setup."""


class DynamicsFault(IntentAdmitError):
    """Non-finite state or force reached the admittance dynamics; trial must abort."""


class DegenerateTrialError(IntentAdmitError):
    """Trial cannot produce ground-truth progress (zero Driving duration or path)."""


class FitFailure(IntentAdmitError):
    """A model fit could not be completed (non-PD kernel, NaN loss, ...)."""


class ArtifactError(IntentAdmitError):
    """Model artifact missing, malformed, or incompatible with the feature spec."""


class LogFormatError(IntentAdmitError):
    """Trial log or manifest file is malformed or truncated."""
