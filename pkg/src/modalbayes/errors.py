"""Exception types shared across the toolkit."""


class ModalBayesError(Exception):
    """Base class for all toolkit errors."""


class InvalidModel(ModalBayesError):
    """Structural model definition is inconsistent or non-physical."""


class SingularMass(ModalBayesError):
    """Mass matrix is not positive definite after constraint elimination."""


class EigenFailure(ModalBayesError):
    """Generalized eigensolve failed or did not meet the residual bound."""


class InvalidSensor(ModalBayesError):
    """Sensor selection refers to degrees of freedom outside the model."""


class DegenerateShape(ModalBayesError):
    """A mode shape vector is identically zero where it must not be."""


class InvalidMeasurement(ModalBayesError):
    """Measurement data is dimensionally or numerically unusable."""


class EvaluationFailure(ModalBayesError):
    """A posterior evaluation could not be completed for a sample."""


class EmptyScreen(ModalBayesError):
    """Pre-screening produced no sample with positive posterior."""


class EmptyHistogram(ModalBayesError):
    """Histogram query on a histogram with no occupied bins."""


class OutOfBox(ModalBayesError):
    """Sample lies outside the histogram's parameter box."""
