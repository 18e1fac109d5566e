"""Exception hierarchy. Each leaf carries a short ``code`` string; the CLI maps
the two families onto process exit codes."""


class DfsError(Exception):
    code = "error"
    exit_code = 1


class DataError(DfsError):
    """Invalid input data, manifests, checkpoints or arguments."""

    code = "data"
    exit_code = 2


class ShapeMismatchError(DataError):
    code = "shape_mismatch"


class ClassOverlapError(DataError):
    code = "class_overlap"


class LeakageError(DataError):
    """A TRAIN sample carries an unseen-class label."""

    code = "leakage"


class NonFiniteDataError(DataError):
    code = "non_finite"


class LabelRangeError(DataError):
    code = "label_range"


class FormatVersionError(DataError):
    code = "format_version"


class TruncatedBlobError(DataError):
    code = "truncated_blob"


class ManifestError(DataError):
    code = "manifest"


class NumericError(DfsError):
    """Training produced a non-finite loss or gradient."""

    code = "numeric"
    exit_code = 3


class StateError(DfsError):
    code = "state"
