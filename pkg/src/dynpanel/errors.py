"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command line front end:
2 for configuration problems, 3 for numerical or identification failures.
"""


class DynPanelError(Exception):
    exit_code = 1


class ConfigError(DynPanelError, ValueError):
    exit_code = 2


class SpecError(ConfigError):
    """A designer world configuration contradicts one of its own declared flags."""


class UnsupportedConfigError(ConfigError):
    pass


class HorizonError(ConfigError):
    pass


class MalformedWorldError(ConfigError):
    pass


class NotApplicableError(ConfigError):
    """The requested check needs latent structure the world does not carry."""


class NumericalError(DynPanelError, ArithmeticError):
    exit_code = 3


class SaturationError(NumericalError):
    pass


class DegenerateWeightsError(NumericalError):
    pass


class OverlapError(NumericalError):
    pass


class CellSupportError(NumericalError):
    pass


class WeightDivisionError(NumericalError):
    pass


class ConditioningError(NumericalError):
    pass


class ExperimentError(DynPanelError):
    exit_code = 3


class AcceptanceFailure(DynPanelError):
    exit_code = 4
