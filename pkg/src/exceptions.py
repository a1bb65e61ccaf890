"""Domain errors raised by the spin-orbit toolkit. The CLI maps every SpinOrbitError to exit status 2."""


class SpinOrbitError(Exception):
    """Base class for all domain errors."""


class InvalidParameters(SpinOrbitError):
    """Physical or integrator parameters violate their invariants."""


class Infeasible(SpinOrbitError):
    """A Picard solvability condition |x| < 1 fails for the requested resonance."""


class NoConvergence(SpinOrbitError):
    """An iteration (Newton, fixed point) did not reach its tolerance."""


class StepUnderflow(SpinOrbitError):
    """The adaptive step fell below the minimum step size."""


class NoRoot(SpinOrbitError):
    """No sign change was found in the bracketing interval."""


class PeakNotFound(SpinOrbitError):
    """No spectral peak stood out of the noise floor."""


class KinkProximity(SpinOrbitError):
    """An operating point lies too close to a tidal-torque kink."""


class Unreachable(SpinOrbitError):
    """The linearised decay never reaches the requested spin rate."""


class FitFailed(SpinOrbitError):
    """Too few usable points, or the least-squares solver did not converge."""
