"""Exception hierarchy shared by the library and the CLI."""


class FieldConcentrationError(Exception):
    """Base class for every error raised by this package."""


class GridError(FieldConcentrationError, ValueError):
    """Invalid grid parameters, off-lattice points or boundary stencils."""


class DimensionError(FieldConcentrationError, ValueError):
    """Operands whose dimensions do not fit together."""


class SymmetryError(FieldConcentrationError, ValueError):
    """A symmetric (Hermitian) input was required."""


class IndefiniteMatrixError(FieldConcentrationError, ValueError):
    """A PSD input has eigenvalues below the round-off threshold."""


class ResourceCapError(FieldConcentrationError):
    """A dense operation would exceed the configured dimension cap."""


class QuadratureError(FieldConcentrationError):
    """Numerical integration did not reach its error target."""


class SamplingError(FieldConcentrationError):
    """A sampler ran out of budget or produced degenerate weights."""


class ConfigError(FieldConcentrationError, ValueError):
    """Invalid experiment configuration.

    ``path`` is the dotted location of the offending key, e.g. ``grid.n``.
    """

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class OutputExistsError(FieldConcentrationError):
    """The results directory for this config already exists (use --force)."""


class EmptySpectrumError(FieldConcentrationError, ValueError):
    """No positive eigenvalue, so conditioning on a large Q is vacuous."""


class RepeatedEigenvalueError(FieldConcentrationError, ValueError):
    """A formula that needs simple (distinct) eigenvalues got a repeated one."""
