"""Error hierarchy: everything this package raises on purpose derives from
FigureError, so the CLI can map exactly that set to exit code 1."""


class FigureError(Exception):
    """Base for all deliberate failures: bad inputs, bad schema, bad shapes."""


class SchemaError(FigureError):
    """An input file does not carry the expected columns or schema version."""
