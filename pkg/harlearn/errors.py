"""
Exception hierarchy for harlearn.

Every error raised on purpose by the package derives from ``HarLearnError``
so the CLI can report a failed matrix cell without swallowing programming
errors.
"""


class HarLearnError(Exception):
    """Base class for all harlearn errors."""


class ConfigError(HarLearnError, ValueError):
    """A configuration value is outside its documented range."""


# --- dataset ---
class ManifestError(HarLearnError):
    pass


class MalformedRow(HarLearnError):
    def __init__(self, path, line, reason):
        self.path = str(path)
        self.line = line
        self.reason = reason
        super().__init__(f"{self.path}:{line}: malformed row ({reason})")


class UnknownActivity(HarLearnError):
    def __init__(self, path, line, label):
        self.path = str(path)
        self.line = line
        self.label = label
        super().__init__(f"{self.path}:{line}: unknown activity {label!r}")


class MissingSubject(HarLearnError):
    def __init__(self, subject_id, detail=""):
        self.subject_id = subject_id
        msg = f"no recordings found for subject {subject_id!r}"
        super().__init__(f"{msg} ({detail})" if detail else msg)


class InvalidRecording(HarLearnError):
    pass


class InsufficientClassData(HarLearnError):
    def __init__(self, subject_id, activity, count):
        self.subject_id = subject_id
        self.activity = activity
        self.count = count
        super().__init__(
            f"subject {subject_id!r}: class {activity} has {count} windows, need >= 3")


# --- features ---
class RecordingTooShort(HarLearnError):
    pass


class EmptyInput(HarLearnError):
    pass


class NonFiniteFeature(HarLearnError):
    def __init__(self, name, value):
        self.name = name
        self.value = value
        super().__init__(f"feature {name} is not finite ({value!r})")


# --- classifiers ---
class DegenerateClass(HarLearnError):
    pass


class SingularCovariance(HarLearnError):
    pass


class DimensionMismatch(HarLearnError):
    def __init__(self, expected, got):
        self.expected = expected
        self.got = got
        super().__init__(f"expected {expected} features, got {got}")


class ModelFormatError(HarLearnError):
    pass


# --- ensemble ---
class EmptyEnsemble(HarLearnError):
    pass


class SingleClassChunk(HarLearnError):
    """Training labels collapsed to one class (e.g. a drifted self-labeler)."""


# --- personalization ---
class EmptyChunk(HarLearnError):
    pass


# --- harness ---
class MissingClassInTest(HarLearnError):
    pass


class LeakageError(HarLearnError):
    """Held-out test rows were found in a training input."""


class ReportWriteError(HarLearnError):
    def __init__(self, path, cause):
        self.path = str(path)
        super().__init__(f"cannot write {self.path}: {cause}")
