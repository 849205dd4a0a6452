"""Exception types shared across the package."""


class InputError(Exception):
    """Malformed or inconsistent user-supplied input (maps, scenarios, missions)."""


class ResourceLimitError(Exception):
    """A requested computation exceeds a configured size or memory cap."""
