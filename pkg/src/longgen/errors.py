"""Exception types shared across the package."""


class SchemaError(ValueError):
    """File contents do not match the declared inventory or record schema."""


class CorruptArchiveError(ValueError):
    """Binary payload is truncated or internally inconsistent."""


class ManifestError(ValueError):
    """Utterance manifest violates ordering or overlap constraints."""


class InfeasibleError(RuntimeError):
    """No batch size of at least 1 fits the given memory budget."""
