class ConfigError(ValueError):
    """Malformed problem spec or experiment configuration."""


class ParseError(ValueError):
    """Malformed dataset file. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


class CapabilityError(TypeError):
    """Operation needs a capability (e.g. Hessians) the problem lacks."""


class DivergenceError(ArithmeticError):
    """Iterate became non-finite or left the divergence ball."""

    def __init__(self, step: int, message: str = "iterate diverged"):
        self.step = step
        super().__init__(f"{message} at step {step}")
