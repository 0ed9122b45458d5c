"""Exception hierarchy shared across the package."""


class StepALError(Exception):
    """Base class for every error raised by this package."""


class InvalidPool(StepALError, ValueError):
    pass


class UnknownVideo(StepALError, KeyError):
    pass


class AlreadyLabeled(StepALError, ValueError):
    pass


class NonFiniteInput(StepALError, ValueError):
    pass


class MissingLogits(StepALError, ValueError):
    pass


class MissingPseudoLabels(StepALError, ValueError):
    pass


class EmptyInput(StepALError, ValueError):
    pass


class EmptyPool(StepALError, ValueError):
    pass


class UnknownStrategy(StepALError, KeyError):
    def __init__(self, name, valid):
        self.name = name
        self.valid = tuple(valid)
        super().__init__(f"unknown strategy {name!r}; valid names: {', '.join(self.valid)}")

    def __str__(self):
        return self.args[0]


class NoLabeledData(StepALError, ValueError):
    pass


class DimensionMismatch(StepALError, ValueError):
    pass


class InvalidConfig(StepALError, ValueError):
    pass


class EmptyTestSet(StepALError, ValueError):
    pass


class ManifestError(StepALError, ValueError):
    """Base class for binary manifest decoding failures."""

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class ShapeMismatch(ManifestError):
    pass


class VersionError(ManifestError):
    pass


class FormatError(ManifestError):
    pass
