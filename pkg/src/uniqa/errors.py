"""Exception types shared across the engine.

Every error carries a ``stage`` label so service responses and CLI output
can report which part of the pipeline failed.
"""


class EngineError(Exception):
    stage = "engine"

    def __init__(self, message: str, *, stage: str | None = None):
        super().__init__(message)
        if stage is not None:
            self.stage = stage

    @property
    def message(self) -> str:
        return str(self)


class ValidationError(EngineError):
    """Input violates a structural invariant (ragged table, bad config, ...)."""

    stage = "validate"


class TableParseError(ValidationError):
    """Linearized table text could not be parsed back; carries a char offset."""

    stage = "parse"

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


class NotFoundError(EngineError):
    stage = "lookup"


class ProviderError(EngineError):
    """A remote provider call failed (transport, bad status, bad shape)."""

    stage = "provider"
