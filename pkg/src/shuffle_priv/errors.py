"""Exception types raised across the library.

Every contract violation maps to a named error so callers can distinguish
bad inputs from genuine numerical failures.
"""


class ShufflePrivError(Exception):
    """Base class for all library errors."""


# --- channel construction and queries ---------------------------------------

class NonStochasticRow(ShufflePrivError, ValueError):
    """A channel row does not sum to 1 within tolerance."""


class NegativeEntry(ShufflePrivError, ValueError):
    """A channel matrix contains a negative probability."""


class InfiniteLDP(ShufflePrivError, ValueError):
    """An output column mixes zero and nonzero mass, forcing an infinite odds ratio."""


class SameInput(ShufflePrivError, ValueError):
    """A pairwise operation was called with identical input indices."""


class LengthMismatch(ShufflePrivError, ValueError):
    """Count vector does not align with the atoms of a ratio law."""


class DimensionMismatch(ShufflePrivError, ValueError):
    """Composition and channel disagree on the number of inputs."""


# --- parameters --------------------------------------------------------------

class BadParams(ShufflePrivError, ValueError):
    """Generic invalid parameter (domain violation)."""


class BadLambda(BadParams):
    """Odds parameter must exceed 1."""


class BadMu(BadParams):
    """Gaussian curve parameter must be positive."""


class BadEps(BadParams):
    """Epsilon must be strictly positive for this bound."""


class BadDelta(BadParams):
    """Cube half-width outside the feasible range."""


class OddD(BadParams):
    """Half-block channels need an even number of inputs."""


class DTooSmall(BadParams):
    """Operation requires at least 3 inputs."""


class MassMismatch(ShufflePrivError, ValueError):
    """Mixture block and null masses do not sum to 1."""


class TemplateSumError(ShufflePrivError, ValueError):
    """Orbit template coordinates must be positive and sum to the input count."""


# --- size guards --------------------------------------------------------------

class AlphabetTooLarge(ShufflePrivError):
    """Explicit output alphabet would exceed the materialization cap."""


class TooLarge(ShufflePrivError):
    """Requested exhaustive computation exceeds its enumeration guard."""


class EnumerationTooLarge(TooLarge):
    """Quotient-composition enumeration exceeds the streaming ceiling."""


class TooManyVertices(TooLarge):
    """Hypercube construction would produce too many vertices."""


# --- numerical conditions -----------------------------------------------------

class ZeroInformation(ShufflePrivError, ValueError):
    """Pairwise chi-square divergence is zero; the statistic is degenerate."""


class ZeroSignal(ShufflePrivError, ValueError):
    """Estimator signal coefficient is zero; inversion impossible."""


class DegenerateMixture(ShufflePrivError, ValueError):
    """Output mixture has a zero-mass symbol at the evaluation point."""


class SimplexViolation(ShufflePrivError, ValueError):
    """Point is not a valid probability vector."""


class SingularFisher(ShufflePrivError):
    """Fisher information is singular on the tangent space; bounds are vacuous."""


class NeutralOrbit(ShufflePrivError, ValueError):
    """Orbit template carries no signal (all coordinates equal)."""


class NoConvergence(ShufflePrivError):
    """Root solve failed to converge within the iteration cap."""


# --- front end ----------------------------------------------------------------

class ParseError(ShufflePrivError, ValueError):
    """Malformed mechanism/channel/law specification."""


class ReproductionFailure(ShufflePrivError):
    """A golden-table value deviated beyond its tolerance."""
