"""Exception hierarchy shared across the package."""


class SpacelikeError(Exception):
    """Base class for all package errors."""


# expression layer

class ExprError(SpacelikeError, ValueError):
    pass


class ParseError(ExprError):
    """Syntax error; ``offset`` is the byte offset into the source text."""

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)


class DomainError(ExprError):
    """An operation left its natural domain; ``subexpr`` names the culprit."""

    def __init__(self, message, subexpr=None):
        self.subexpr = subexpr
        if subexpr is not None:
            message = f"{message} in `{subexpr}`"
        super().__init__(message)


# geometry layer

class NonSpacelike(SpacelikeError, ValueError):
    """|Du| >= 1: the graph is not spacelike at the point."""


class DegenerateGradient(SpacelikeError, ValueError):
    """|Du| below the threshold; level-set quantities are undefined."""


class NotTangent(SpacelikeError, ValueError):
    pass


class ZeroDirection(SpacelikeError, ValueError):
    pass


# grid layer

class StencilIncomplete(SpacelikeError, ValueError):
    pass


class EmptyInterior(SpacelikeError, ValueError):
    pass


class FieldFormatError(SpacelikeError, ValueError):
    pass


# catalog

class CatalogError(SpacelikeError, ValueError):
    pass


class RegionViolation(CatalogError):
    pass


# solver

class SolverError(SpacelikeError):
    """Base for solve failures; ``result`` holds the partial SolveResult."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class SpatialityLoss(SolverError, ValueError):
    def __init__(self, message, nodes=(), result=None):
        super().__init__(message, result)
        self.nodes = list(nodes)


class SingularJacobian(SolverError):
    pass


class NoDescent(SolverError):
    pass


class NotConverged(SolverError):
    pass
