"""Exception hierarchy shared by all modules."""


class MaadaError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(MaadaError, ValueError):
    pass


class DimensionError(MaadaError, ValueError):
    pass


class ContractError(MaadaError, ValueError):
    pass


class EvaluationError(MaadaError, ArithmeticError):
    pass


class DataError(MaadaError, ValueError):
    pass


class ParseError(DataError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TrainingError(MaadaError, ArithmeticError):
    """Non-finite loss during optimization; carries where it happened."""

    def __init__(self, message, term=None, epoch=None):
        self.term = term
        self.epoch = epoch
        parts = [message]
        if epoch is not None:
            parts.append(f"epoch={epoch}")
        if term is not None:
            parts.append(f"term={term}")
        super().__init__(" ".join(parts))
