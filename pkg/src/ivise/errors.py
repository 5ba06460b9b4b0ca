"""Exception types shared across the pipeline."""


class IviseError(Exception):
    """Base class for all pipeline errors."""


# -- geometry ---------------------------------------------------------------

class DegenerateLimb(IviseError):
    """Zero-length limb; usually a missing or duplicated keypoint."""


class EmptyField(IviseError):
    """Affinity field holds no samples."""


# -- pose providers ---------------------------------------------------------

class FixtureMiss(IviseError):
    """No recorded pose result for the requested (camera, sequence)."""


class RemoteUnavailable(IviseError):
    """Remote inference endpoint unreachable or timed out."""


class MalformedResponse(IviseError):
    """Remote inference endpoint returned an unparseable body."""


class ParseError(IviseError):
    """A versioned text file failed to parse.

    Carries the 1-based line number and offending field when known.
    """

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = f" (line {line}" + (f", field {field!r})" if field else ")") if line else ""
        super().__init__(message + where)


# -- region extraction ------------------------------------------------------

class EmptyFrame(IviseError):
    """Frame carries no pixel buffer."""


class MissingKeypoint(IviseError):
    """Prerequisite keypoints for a body section are absent."""

    def __init__(self, section: str, parts: tuple[str, ...]):
        self.section = section
        self.parts = parts
        super().__init__(f"section {section!r} needs missing keypoints: {', '.join(parts)}")


class DegenerateRegion(IviseError):
    """Section geometry collapsed (zero-area triangle, coincident points...)."""

    def __init__(self, section: str, reason: str):
        self.section = section
        super().__init__(f"section {section!r} degenerate: {reason}")


# -- color engine -----------------------------------------------------------

class EmptyRegion(IviseError):
    """Region has no pixels to cluster."""


class KTooLarge(IviseError):
    """Requested more clusters than there are pixels."""


# -- query engine -----------------------------------------------------------

class QueryError(IviseError):
    """Base for operator query parse failures; carries the offending token."""

    def __init__(self, message: str, token: str = ""):
        self.token = token
        super().__init__(message)


class EmptyQuery(QueryError):
    def __init__(self):
        super().__init__("query text is empty")


class UnknownGarment(QueryError):
    def __init__(self, token: str):
        super().__init__(f"unknown garment {token!r}", token)


class UnknownColor(QueryError):
    def __init__(self, token: str, section: str):
        self.section = section
        super().__init__(f"color {token!r} not in the {section} palette", token)


class UnknownCamera(IviseError):
    """Camera ID absent from the registry."""


class UnknownQuery(IviseError):
    """No session with that query ID."""


# -- wire protocol ----------------------------------------------------------

class VersionMismatch(IviseError):
    """Envelope version byte is not one we speak."""


class TruncatedPayload(IviseError):
    """Byte stream ended before the declared payload length."""


class UnknownKind(IviseError):
    """Envelope kind byte outside the closed set."""


# -- services ---------------------------------------------------------------

class FogDisconnected(IviseError):
    """Edge lost its fog connection; messages are buffered or dropped."""


class UnknownEdge(IviseError):
    """Feature message from a camera ID the fog does not know."""


# -- simulation -------------------------------------------------------------

class OverlapError(IviseError):
    """Scene spec places two persons with intersecting bounding boxes."""
