"""Exception hierarchy shared by all stages."""


class RatingNetError(Exception):
    """Base class for every error raised by the package."""


class ParseError(RatingNetError):
    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class ValidationError(ParseError):
    pass


class SchemaError(ParseError):
    pass


class GraphError(RatingNetError):
    pass


class NodeLookupError(GraphError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class SplitError(GraphError):
    pass


class ConvergenceError(RatingNetError):
    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class DivergenceError(RatingNetError):
    pass


class ShapeError(RatingNetError, ValueError):
    pass


class ConfigError(RatingNetError, ValueError):
    pass


class FitError(RatingNetError, ValueError):
    pass


class MetricError(RatingNetError, ValueError):
    pass


class StatError(RatingNetError, ValueError):
    pass


class DependencyError(RatingNetError):
    def __init__(self, message, stage=None):
        super().__init__(message)
        self.stage = stage
