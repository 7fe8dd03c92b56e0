"""Exception hierarchy shared by all modules."""


class BlockJacobiError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(BlockJacobiError, ValueError):
    """Malformed operator data (shapes, missing coupling, bad document)."""


class HypothesisFailure(BlockJacobiError):
    """The channel hypotheses needed by the reduced construction do not hold."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class Hypothesis3Violated(HypothesisFailure):
    """A compressed spectral projector of a diagonal block is not invertible."""


class NumericalFailure(BlockJacobiError):
    """A computation could not be carried out to the requested accuracy."""


class EnergyAtPole(NumericalFailure):
    """Energy too close to the spectrum of a diagonal block for direct inversion."""


class IllConditionedEnergy(NumericalFailure):
    """A Green block that has to be inverted is (numerically) singular."""

    def __init__(self, message, sigma_min=None, site=None, energy=None):
        super().__init__(message)
        self.sigma_min = sigma_min
        self.site = site
        self.energy = energy


class NonMonotoneCrossing(NumericalFailure):
    """An eigenphase of the Pruefer unitary crossed -1 in the negative sense."""


class MalformedFrame(NumericalFailure):
    """A frame is rank deficient or not isotropic."""


class DimensionCapExceeded(BlockJacobiError):
    """The dense oracle refuses matrices above its configured size."""
