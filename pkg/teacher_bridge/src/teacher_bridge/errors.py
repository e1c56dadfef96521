"""Error taxonomy mirrored onto CLI exit codes (2 input, 3 teacher, 4 internal)."""


class BridgeError(Exception):
    """Base for everything this package raises on purpose."""


class InputError(BridgeError):
    """Problems with user-supplied files or arguments."""


class TeacherUnavailableError(BridgeError):
    """The requested teacher identifier has no registered implementation."""
