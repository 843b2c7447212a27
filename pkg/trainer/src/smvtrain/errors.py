"""Errors raised while building corpora and training."""


class TrainError(Exception):
    """Base class for trainer failures."""


class BadCorpus(TrainError):
    """The corpus directory holds nothing usable."""


class CompilerUnavailable(TrainError):
    """No Solidity compiler with source-map output can be invoked."""


class CompilationFailed(TrainError):
    """One source file failed to compile."""

    def __init__(self, path: str, message: str) -> None:
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


class DivergedLoss(TrainError):
    """Training loss became non-finite."""
