"""Exception types shared across the scanner."""


class SmvScanError(Exception):
    """Base class for scanner failures."""


class EmptyInput(SmvScanError):
    """Bytecode input decoded to zero bytes."""


class MalformedHex(SmvScanError):
    """Text input is not valid hexadecimal."""


class WindowOutOfRange(SmvScanError):
    """Requested tokenizer window exceeds stream bounds."""


class ShapeMismatch(SmvScanError):
    """Weight tensors disagree with the declared model header."""


class ChecksumMismatch(SmvScanError):
    """Weight-file checksum verification failed."""


class ParseError(SmvScanError):
    """Stored file contents could not be parsed."""


class DuplicateKey(SmvScanError):
    """A (subcontract, version, method) key occurs more than once."""


class UnknownKind(SmvScanError):
    """Knowledge entry kind outside the supported taxonomy."""


class InvalidSymbol(SmvScanError):
    """A stored signature token is outside the 18-symbol alphabet."""


class EmptyContractSignature(SmvScanError):
    """Length similarity is undefined for an empty contract signature."""
