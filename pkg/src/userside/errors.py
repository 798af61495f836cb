"""Exception hierarchy shared across the toolkit."""

from __future__ import annotations


class UsersideError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(UsersideError):
    """Bad configuration: missing files, malformed options. CLI exit code 2."""


class UnknownItemError(UsersideError):
    """Item id outside the catalog range."""

    def __init__(self, item: int, n: int):
        super().__init__(f"unknown item id {item} (catalog has items 1..{n})")
        self.item = item
        self.n = n


class UnknownGroupError(UsersideError):
    """Group id outside the catalog's group range; signals a corrupt catalog."""

    def __init__(self, group: object, n_groups: int):
        super().__init__(
            f"unknown group id {group!r} (catalog has groups 0..{n_groups - 1})"
        )
        self.group = group
        self.n_groups = n_groups


class InfeasibleTauError(UsersideError):
    """The per-group minimum cannot be met. CLI exit code 3, HTTP 422.

    ``group`` is the offending group (or None when tau * n_groups > K).
    """

    def __init__(self, message: str, group: int | None = None,
                 group_name: str | None = None):
        super().__init__(message)
        self.group = group
        self.group_name = group_name


class StepInvariantError(UsersideError):
    """The running fairness-deficit bound was violated mid-algorithm.

    This should be unreachable; it exists so instrumented runs fail loudly
    instead of silently producing an unfair list.
    """


class IngestError(UsersideError):
    """Malformed dataset input; carries the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class CrawlError(UsersideError):
    """Oracle failure during a network crawl; carries the offending item."""

    def __init__(self, item: int, cause: Exception):
        super().__init__(f"oracle failed on item {item}: {cause}")
        self.item = item


class DisconnectedGraphError(UsersideError):
    """Metric recovery needs a connected graph; lists component labels."""

    def __init__(self, n_components: int, labels):
        super().__init__(
            f"graph has {n_components} connected components; recovery needs 1"
        )
        self.n_components = n_components
        self.labels = labels


class DegenerateReferenceError(UsersideError):
    """Alignment reference has zero variance."""
