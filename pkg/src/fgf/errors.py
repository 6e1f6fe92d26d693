"""Exception hierarchy shared by every module.

All numerical failures derive from :class:`FGFError` so the CLI can map them
onto exit status 2 and record the class name in the run manifest.
"""


class FGFError(Exception):
    """Base class for numerical failures."""


class DomainError(FGFError, ValueError):
    """Parameter outside the operation's domain."""


class PoleError(DomainError):
    """A Gamma-function pole was hit; use the residue form instead."""


class NoPointwiseKernel(DomainError):
    """The covariance kernel is a distribution with no pointwise value."""


class MomentError(DomainError):
    """Test function lacks the vanishing moments the pairing requires."""


class SingularityError(DomainError):
    """Kernel evaluated on its diagonal where it diverges."""


class GeometryError(DomainError):
    """Point set is not of the required lattice/ball geometry."""


class QuadratureError(FGFError):
    """Adaptive quadrature failed to converge within budget."""


class TailError(FGFError):
    """Truncated tail exceeds the requested tolerance (or diverges)."""


class HypergeometricError(FGFError):
    """2F1 evaluation hit a degenerate or non-convergent branch."""


class PSDError(FGFError):
    """Assembled covariance violates its positive-semidefinite floor."""


class DominanceError(FGFError):
    """Precision matrix failed its diagonal-dominance certificate."""


class FactorizationError(FGFError):
    """Cholesky factorization failed."""


class InsufficientData(FGFError):
    """Too few samples/pairs for a stable statistic."""
