"""Exception types shared across the toolkit."""


class LanesegError(Exception):
    """Base class for all toolkit-specific errors."""


class VideoIngestError(LanesegError):
    """Video file could not be opened or decoded."""


class EmptyVideoError(VideoIngestError):
    """Video container opened but yielded zero decodable frames."""


class ManifestError(LanesegError):
    """Dataset manifest is missing, malformed, or references bad files."""


class AugmentationSpecError(LanesegError):
    """Augmentation spec names an unknown transform or has invalid parameters."""


class CheckpointError(LanesegError):
    """Checkpoint is missing, corrupt, or has an incompatible format version."""


class ConfigMismatchError(CheckpointError):
    """Stored weights do not fit the stored model configuration."""


class TrainingDivergedError(LanesegError):
    """Loss became non-finite during optimization."""

    def __init__(self, step: int, components: dict):
        self.step = step
        self.components = components
        super().__init__(
            f"non-finite loss at step {step}: "
            + ", ".join(f"{k}={v}" for k, v in components.items())
        )
