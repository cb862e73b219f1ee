"""Exception hierarchy shared by all strapkit modules."""


class StrapkitError(Exception):
    """Base class for all errors raised by strapkit."""


# --- manifest / tile I/O ---

class MissingColumn(StrapkitError):
    pass


class DuplicateTileId(StrapkitError):
    pass


class UnresolvablePath(StrapkitError):
    pass


class BadLabel(StrapkitError):
    pass


class ZeroDimension(StrapkitError):
    pass


# --- network weights / forward pass ---

class FormatError(StrapkitError):
    pass


class ShapeMismatch(StrapkitError):
    pass


class NonFiniteWeight(StrapkitError):
    pass


class IndivisibleInput(StrapkitError):
    pass


class ChannelMismatch(StrapkitError):
    pass


# --- stain estimation ---

class InsufficientTissue(StrapkitError):
    pass


class DegenerateSpectrum(StrapkitError):
    pass


# --- statistics ---

class SingleClass(StrapkitError):
    pass


class NonConvergent(StrapkitError):
    pass


class MismatchedRows(StrapkitError):
    pass


class DegenerateVariance(StrapkitError):
    pass


class LengthMismatch(StrapkitError):
    pass


class OutOfRangeP(StrapkitError):
    pass


class InconsistentLabel(StrapkitError):
    pass


# --- CLI ---

class EmptyStyleSource(StrapkitError):
    pass


class BadRangeSyntax(StrapkitError):
    pass
