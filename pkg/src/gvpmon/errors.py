"""Exception types raised across the package.

Validation problems derive from ``ValidationError`` so the CLI can map them
onto a single exit code.
"""


class GvpError(Exception):
    """Base class for all package errors."""


class ValidationError(GvpError, ValueError):
    """Input violated a documented precondition."""


class OutOfRange(ValidationError):
    pass


class ZeroRoiArea(ValidationError):
    pass


class InvalidRoi(ValidationError):
    pass


class ParseError(ValidationError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class EmptySource(ValidationError):
    pass


class DuplicateFrameId(ValidationError):
    pass


class NonMonotonicTimestamps(ValidationError):
    pass


class CountExceedsTrain(ValidationError):
    pass


class MissingAnnotations(ValidationError):
    def __init__(self, frame_ids):
        self.frame_ids = list(frame_ids)
        shown = ", ".join(self.frame_ids[:10])
        more = f" (+{len(self.frame_ids) - 10} more)" if len(self.frame_ids) > 10 else ""
        super().__init__(f"no annotations for frames: {shown}{more}")


class EmptySeries(ValidationError):
    pass


class InvalidConfig(ValidationError):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class SigmaTooLarge(ValidationError):
    pass


class AdapterError(GvpError):
    """Failure on the external detector process boundary."""


class AdapterCrashed(AdapterError):
    def __init__(self, returncode: int, stderr: str = ""):
        self.returncode = returncode
        self.stderr = stderr
        tail = stderr.strip().splitlines()[-1:] if stderr else []
        detail = f": {tail[0]}" if tail else ""
        super().__init__(f"adapter exited with code {returncode}{detail}")


class ProtocolViolation(AdapterError):
    pass


class MissingInput(ValidationError):
    """A path the command needs does not exist when the command starts."""
