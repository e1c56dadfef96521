"""Exception hierarchy shared across the engine.

The CLI maps these onto exit codes: InputError -> 2, ModelError -> 3,
anything else escaping to the top level -> 4.
"""


class SraveError(Exception):
    pass


class InputError(SraveError):
    """Bad user-supplied data: unreadable audio, wrong sample rate, bad flags."""


class ModelError(SraveError):
    """Bad model state: containers that do not parse, mismatched shapes."""


class ContainerError(ModelError):
    """Weight container violates the on-disk format."""
