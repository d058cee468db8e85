"""Exceptions shared across the package, mapped to CLI exit codes."""


class ConfigError(Exception):
    """Invalid configuration or unusable input files (exit code 2)."""


class DivergenceError(Exception):
    """Numeric divergence during an optimization loop (exit code 3)."""

    def __init__(self, message, iteration=None, checkpoint=None):
        super().__init__(message)
        self.iteration = iteration
        self.checkpoint = checkpoint


class ArtifactMismatch(Exception):
    """Checkpoint/architecture/grid inconsistency between artifacts (exit code 4)."""
