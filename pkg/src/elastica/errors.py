"""Exception hierarchy shared by all elastica modules."""


class ElasticaError(Exception):
    """Base class for every error raised by elastica."""


class RegularityError(ElasticaError):
    """A curve has (numerically) vanishing speed at some node."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class TopologyError(ElasticaError):
    """Operation called with an open curve where a closed one is required, or vice versa."""


class GridMismatch(ElasticaError):
    """Two curves were expected to share a parameter grid."""


class ConeViolation(ElasticaError):
    """A lifted value is off the cone, or a node hit the apex."""


class DegenerateInterior(ElasticaError):
    """A node path of an open geodesic passes through the cone apex."""

    def __init__(self, message, nodes=None, times=None):
        super().__init__(message)
        self.nodes = nodes
        self.times = times


class ExistenceTimeExceeded(ElasticaError):
    """The explicit geodesic leaves the space of immersions before the requested time."""

    def __init__(self, message, t_max):
        super().__init__(message)
        self.t_max = t_max


class DegenerateBasis(ElasticaError):
    """Gram-Schmidt (or a sectional plane) became numerically degenerate."""


class NewtonDivergence(ElasticaError):
    """The RATTLE position-constraint solve did not converge."""

    def __init__(self, message, step=None, residual=None):
        super().__init__(message)
        self.step = step
        self.residual = residual


class NoConvergence(ElasticaError):
    """An iterative solver stopped at its iteration cap; ``result`` holds the best iterate."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class MonotonicityLost(ElasticaError):
    """A discrete circle diffeomorphism stopped being strictly increasing."""


class SingularSystem(ElasticaError):
    """The finite element system for the vertical projection could not be solved."""


class IncompletenessDetected(ElasticaError):
    """Grid refinement kept hitting its cap: a segment is collapsing to a point."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class ParseError(ElasticaError):
    """A shape file could not be parsed."""

    def __init__(self, message, line=None, field=None):
        super().__init__(message)
        self.line = line
        self.field = field
