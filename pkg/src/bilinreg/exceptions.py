"""Exception types. The CLI maps each family to an exit code."""


class ConfigError(ValueError):
    """Invalid arguments, shapes or configuration (exit code 1)."""


class ShapeError(ConfigError):
    pass


class DataError(ValueError):
    """Missing or malformed input data, or a split the pools cannot satisfy (exit code 2)."""


class NumericError(ArithmeticError):
    """Non-finite objective, failed SVD convergence, threshold breach (exit code 3)."""


class SvdNotConverged(NumericError):
    pass
