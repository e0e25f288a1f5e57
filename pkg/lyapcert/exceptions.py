"""
Exceptions raised by the lyapcert toolkit.

Everything derives from LyapcertError so that the management commands can
translate domain failures into the exit-code contract in one place. Input
problems with system files are reported separately, as DRF ValidationErrors
(see lyapcert.serializers).
"""


class LyapcertError(Exception):
    """Base class for every error the toolkit raises on purpose."""
    default_detail = 'Stability analysis failed.'

    def __init__(self, detail=None):
        self.detail = detail if detail is not None else self.default_detail
        super().__init__(self.detail)


# --- Expression language ---

class ExpressionError(LyapcertError):
    """A problem with expression text, located at a character offset."""
    default_detail = 'Invalid expression.'

    def __init__(self, detail=None, offset=None, source=None):
        self.offset = offset
        self.source = source
        super().__init__(detail)

    def __str__(self):
        if self.offset is None:
            return str(self.detail)
        return f'{self.detail} (at offset {self.offset})'


class ExpressionSyntaxError(ExpressionError):
    default_detail = 'Syntax error.'


class UnknownIdentifierError(ExpressionError):
    default_detail = 'Unknown identifier.'


class ArityError(ExpressionError):
    default_detail = 'Wrong number of arguments.'


# --- Evaluation ---

class EvaluationError(LyapcertError):
    default_detail = 'Evaluation failed.'


class DimensionError(EvaluationError):
    default_detail = 'Point dimension does not match the expression or system.'


class DomainError(EvaluationError):
    default_detail = 'Argument outside the real domain of the function.'


class NonFiniteValueError(EvaluationError):
    default_detail = 'Evaluation produced a non-finite value.'

    def __init__(self, detail=None, value=None):
        self.value = value
        super().__init__(detail)


class NonDifferentiableError(EvaluationError):
    default_detail = 'Expression is not differentiable at this point.'


# --- Systems ---

class SystemDefinitionError(LyapcertError):
    default_detail = 'Invalid system definition.'


class ZeroSolutionError(SystemDefinitionError):
    default_detail = 'g(0) is not zero; the origin is not an equilibrium.'


class NotAnEquilibriumError(SystemDefinitionError):
    default_detail = 'The requested shift point is not an equilibrium.'


class UnsupportedFeatureError(SystemDefinitionError):
    default_detail = 'Feature not supported.'


# --- Numerics ---

class QuadratureError(LyapcertError):
    default_detail = 'Ray-integral quadrature did not converge.'


class EigenSolverError(LyapcertError):
    default_detail = 'Jacobi eigensolver did not converge.'


class IntegrationError(LyapcertError):
    default_detail = 'Trajectory integration failed.'


class EquilibriumError(LyapcertError):
    default_detail = 'Equilibrium search failed.'

    def __init__(self, detail=None, iterate=None):
        self.iterate = iterate
        super().__init__(detail)


class EmptySamplingPlanError(LyapcertError):
    default_detail = 'The sampling plan contains no points.'


class NotPositiveDefiniteError(LyapcertError):
    default_detail = 'The Lyapunov matrix P must be symmetric positive definite.'


class ConfigurationError(LyapcertError):
    default_detail = 'Invalid lyapcert configuration.'
