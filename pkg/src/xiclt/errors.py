"""Exception types raised by xiclt.

Domain errors derive from :class:`XiError`; input-parsing errors derive from
:class:`InputError`. The CLI maps the former to exit code 1 and the latter
to exit code 2, printing the class name on stderr.
"""


class XiError(ValueError):
    """Base class for domain errors."""


class InputError(ValueError):
    """Base class for malformed input (files, flags, model specs)."""


class NegativeProbability(XiError):
    pass


class MassNotOne(XiError):
    pass


class DegenerateY(XiError):
    """Y is (almost surely) constant, so the dependence measure is undefined."""


class AllYEqual(XiError):
    """All observed Y values coincide; the coefficient's denominator is zero."""


class UnknownModel(XiError):
    pass


class BadParams(XiError):
    pass


class ArityTooLargeForN(XiError):
    pass


class ArityGuard(XiError):
    pass


class SupportTooLarge(XiError):
    pass


class NoXTies(XiError):
    """Plug-in variance needs repeated X values."""


class BadM(XiError):
    pass


class ZeroSigma(XiError):
    pass


class ParseError(InputError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class TooFewRows(InputError):
    pass


class NonFiniteValue(InputError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column
