"""Exception hierarchy.

Every error carries a machine-readable ``category`` and the process exit
code the CLI uses for it.
"""


class SVError(Exception):
    category = "error"
    exit_code = 1


class IoError(SVError):
    category = "io"
    exit_code = 2


class ConfigError(SVError):
    category = "config"
    exit_code = 3

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class UnsupportedFormat(SVError):
    category = "unsupported_format"
    exit_code = 4


class SignalTooShort(SVError):
    category = "signal_too_short"
    exit_code = 5


class UnsupportedMode(SVError):
    category = "unsupported_mode"
    exit_code = 6


class ShapeError(SVError):
    category = "shape"
    exit_code = 7

    def __init__(self, name, expected=None, found=None):
        self.name = name
        self.expected = expected
        self.found = found
        if expected is None and found is None:
            super().__init__(name)
        else:
            super().__init__(f"{name}: expected {expected}, found {found}")


class MissingTensor(SVError):
    category = "missing_tensor"
    exit_code = 8

    def __init__(self, name):
        self.name = name
        super().__init__(f"missing tensor {name!r}")


class BadMagic(SVError):
    category = "bad_magic"
    exit_code = 9


class CrcMismatch(SVError):
    category = "crc_mismatch"
    exit_code = 10


class VersionUnsupported(SVError):
    category = "version_unsupported"
    exit_code = 11


class StreamStateError(SVError):
    category = "stream_state"
    exit_code = 12


class PushAfterFlush(StreamStateError):
    pass


class DoubleFlush(StreamStateError):
    pass


class EmptyUtterance(SVError):
    category = "empty_utterance"
    exit_code = 13


class ZeroVector(SVError):
    category = "zero_vector"
    exit_code = 14


class EmptyEnrollment(SVError):
    category = "empty_enrollment"
    exit_code = 15


class MalformedLine(SVError):
    category = "malformed_line"
    exit_code = 16

    def __init__(self, line_no, line=""):
        self.line_no = line_no
        super().__init__(f"line {line_no}: malformed trial {line!r}")


class OneClassOnly(SVError):
    category = "one_class_only"
    exit_code = 17


class BadIndex(SVError):
    category = "bad_index"
    exit_code = 18


class MissingAudio(SVError):
    category = "missing_audio"
    exit_code = 19

    def __init__(self, path):
        self.path = path
        super().__init__(f"audio not found: {path}")
