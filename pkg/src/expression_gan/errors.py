from typing import Optional, Sequence


class ExpressionGANError(Exception):
    """Base class for every error raised by expression_gan."""
    pass


class ConfigError(ExpressionGANError):
    """Raised for invalid configuration files, values or overrides."""
    pass


class ManifestError(ExpressionGANError):
    """Raised when a manifest cannot be read or a row fails validation."""

    def __init__(self, message: str, row: Optional[int] = None, path: Optional[str] = None):
        self.row = row
        self.path = path
        location = ""
        if path is not None:
            location += f"{path}"
        if row is not None:
            location += f" (row {row})" if location else f"row {row}"
        super().__init__(f"{location}: {message}" if location else message)


class LabelError(ExpressionGANError):
    """Raised for an expression or intensity label outside its vocabulary."""

    def __init__(self, label, vocabulary: Sequence):
        self.label = label
        self.vocabulary = list(vocabulary)
        valid = ", ".join(str(v) for v in self.vocabulary)
        super().__init__(f"Unknown label '{label}'. Valid labels: {valid}")


class DatasetError(ExpressionGANError):
    """Raised when a dataset cannot satisfy a split or pairing request."""
    pass


class LandmarkExtractionError(ExpressionGANError):
    """Raised when no landmark discs can be found in a landmark image."""
    pass


class EmbedderNotFrozenError(ExpressionGANError):
    """Raised when a trainable network is used where a frozen one is required."""
    pass


class TrainingAbortedError(ExpressionGANError):
    """Raised when a training step produces a non-finite loss term."""

    def __init__(self, term: str, step: int, value: float):
        self.term = term
        self.step = step
        self.value = value
        super().__init__(f"Non-finite loss term '{term}' ({value}) at step {step}")


class CheckpointError(ExpressionGANError):
    """Raised for missing or unreadable checkpoints."""
    pass
