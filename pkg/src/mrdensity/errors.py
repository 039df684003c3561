"""Exception hierarchy.

``InputError`` covers bad files, bad geometry and bad configuration (CLI exit
code 2); ``ComputationError`` covers failures inside segmentation backends and
numerical routines (CLI exit code 3).
"""


class MRDensityError(Exception):
    """Base class for all package errors."""


class InputError(MRDensityError, ValueError):
    pass


class ComputationError(MRDensityError, RuntimeError):
    pass


class DicomError(InputError):
    pass


class FormatError(InputError):
    """Malformed or inconsistent portable volume / mask file."""


class PhantomSpecError(InputError):
    pass


class ZeroVarianceError(InputError):
    pass


class BackendError(ComputationError):
    pass


class MaskError(InputError):
    """Mask pair violates a precondition (dims, emptiness, containment)."""


class UnknownCategoryError(InputError):
    pass


class InsufficientDataError(InputError):
    pass
