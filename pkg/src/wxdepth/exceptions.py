"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A shape, resolution, or parameter setting is inconsistent."""


class DegenerateInputError(ValueError):
    """An input is numerically unusable (non-finite, empty mask, zero disparity)."""


class DataError(RuntimeError):
    """A dataset file is missing, malformed, or inconsistent."""


class MissingVariantError(DataError):
    """A requested weather variant image does not exist on disk."""

    def __init__(self, scene: str, frame: str, variant: str):
        self.scene = scene
        self.frame = frame
        self.variant = variant
        super().__init__(f"missing variant '{variant}' for scene '{scene}' frame '{frame}'")
