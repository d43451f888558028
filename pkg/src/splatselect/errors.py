"""Exception types shared across the toolkit."""


class EngineError(Exception):
    """Base class for domain errors (as opposed to bad arguments)."""


class SceneFormatError(EngineError):
    """Scene file is structurally valid but violates the expected schema."""

    def __init__(self, message: str, attribute: str | None = None):
        super().__init__(message)
        self.attribute = attribute


class SceneIOError(EngineError):
    """Scene file is truncated or unreadable.

    ``offset`` is the byte offset at which reading failed, when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


class DegenerateSelectionError(EngineError):
    """Selection has too few points or no usable principal directions."""


class NoHitsError(EngineError):
    """A 2D mask covers no rendered geometry, so nothing can be lifted."""


class ProviderError(EngineError):
    """A mask provider failed or violated its contract."""

    def __init__(self, message: str, diagnostics: str | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics
