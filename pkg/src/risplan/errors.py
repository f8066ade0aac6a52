"""Exception types shared across the package.

Two families matter to the CLI: configuration problems (bad files, bad
flags; exit code 2) and runtime failures (metric/scene mismatch, solver
breakdown; exit code 3).
"""


class ConfigError(ValueError):
    """Invalid input data or options."""


class RunError(RuntimeError):
    """Computation failed or was asked for something the scene cannot support."""


class TouchstoneError(ConfigError):
    """Malformed Touchstone file; carries the offending line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SceneError(ConfigError):
    """Scene file failed validation; message starts with the key path."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class CoincidentNodeError(ValueError):
    """Evaluation point sits exactly on a scene node (zero-length path)."""
