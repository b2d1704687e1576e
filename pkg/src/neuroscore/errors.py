"""Exception and warning types.

Every error carries an ``exit_code`` used by the command-line front end:
2 for IO/configuration problems, 3 for numerical degeneracy, 4 for data
contract violations.
"""


class NeuroscoreError(Exception):
    exit_code = 1


class ConfigError(NeuroscoreError):
    exit_code = 2


class InvalidSpec(ConfigError):
    pass


class UnstableDesign(ConfigError):
    pass


class NonIntegerFactor(ConfigError):
    pass


class DataContractError(NeuroscoreError, ValueError):
    exit_code = 4


class FormatError(DataContractError):
    pass


class ChecksumMismatch(DataContractError):
    pass


class GridMismatch(DataContractError):
    pass


class ShapeMismatch(DataContractError):
    pass


class DimensionMismatch(DataContractError):
    pass


class TimeOutOfEpoch(DataContractError):
    pass


class EmptyGroup(DataContractError):
    pass


class EmptyCategory(DataContractError):
    pass


class SingleChannel(DataContractError):
    pass


class NumericalError(NeuroscoreError, ArithmeticError):
    exit_code = 3


class DegeneratePattern(NumericalError):
    pass


class SingularCovariance(NumericalError):
    pass


class NotPSD(NumericalError):
    pass


class ZeroVariance(NumericalError):
    pass


class BandwidthNonPositive(NumericalError):
    pass


class TooFewSamples(NumericalError):
    pass


class ZeroMarginalWithMass(NumericalError):
    pass


class DegenerateGroups(NumericalError):
    pass


# warnings -----------------------------------------------------------------

class NeuroscoreWarning(UserWarning):
    pass


class WindowOutOfBounds(NeuroscoreWarning):
    pass


class WindowClipped(NeuroscoreWarning):
    pass


class InsufficientTrials(NeuroscoreWarning):
    pass


class NoVariation(NeuroscoreWarning):
    pass


class LowSampleSize(NeuroscoreWarning):
    pass


class AllRejected(NeuroscoreWarning):
    pass
