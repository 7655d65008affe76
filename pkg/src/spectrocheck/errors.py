"""Exception hierarchy.

Every error carries an ``exit_code`` so the command line can map failures to
its documented status codes (2 usage/config, 3 I/O, 4 numerical divergence).
"""


class SpectroError(Exception):
    exit_code = 2


class ConfigError(SpectroError, ValueError):
    """Invalid configuration, recipe file or degenerate training input."""


class InputError(SpectroError, ValueError):
    """Invalid arguments to a metric or data routine."""


class RangeError(SpectroError, ValueError):
    """A wavelength, column or crop rectangle outside its allowed range."""


class ShapeError(SpectroError, ValueError):
    """Array or feature vector of the wrong shape."""


class FormatError(SpectroError, ValueError):
    """Malformed PPM, model or manifest file."""


class KindError(SpectroError, TypeError):
    """Operation not defined for this model kind."""


class DivergenceError(SpectroError, ArithmeticError):
    exit_code = 4

    def __init__(self, epoch, loss):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"training diverged at epoch {epoch} (loss={loss!r})")
