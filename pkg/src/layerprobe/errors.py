"""Exception types raised across the toolkit.

Every error is a subclass of LayerProbeError so callers can catch the whole
family at the CLI boundary. Parsers attach line numbers, binary readers
attach byte offsets; both go into the message so errors stay one-line
machine-parsable.
"""


class LayerProbeError(Exception):
    pass


# --- tensor / array plumbing ---

class LengthMismatch(LayerProbeError):
    pass


class NonFiniteValue(LayerProbeError):
    pass


class ShapeMismatch(LayerProbeError):
    pass


class CropTooLarge(LayerProbeError):
    pass


class OutputLargerThanInput(LayerProbeError):
    pass


# --- model manifest / weights ---

class ManifestError(LayerProbeError):
    """Syntax error in a model manifest; message carries the line number."""

    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class UnknownLayerKind(ManifestError):
    pass


class DuplicateName(ManifestError):
    pass


class BadTap(ManifestError):
    pass


class ShapeUnderflow(LayerProbeError):
    """Shape inference produced a dimension < 1 (or a spatial op after flatten)."""

    def __init__(self, layer, message):
        self.layer = layer
        super().__init__(f"layer {layer!r}: {message}")


class BadMagic(LayerProbeError):
    pass


class MissingParameter(LayerProbeError):
    pass


class NonFiniteWeight(LayerProbeError):
    pass


class TrailingBytes(LayerProbeError):
    pass


class TruncatedFile(LayerProbeError):
    pass


# --- alignment / extraction ---

class DegenerateLandmarks(LayerProbeError):
    pass


class DimMismatch(LayerProbeError):
    pass


class DuplicateImageId(LayerProbeError):
    pass


# --- svm ---

class SingleClass(LayerProbeError):
    pass


class NonFiniteFeature(LayerProbeError):
    pass


# --- evaluation / reports ---

class SingleClassTruth(LayerProbeError):
    pass


class MissingKind(LayerProbeError):
    pass


class MissingFeature(LayerProbeError):
    pass


class UnknownAttribute(LayerProbeError):
    pass


# --- dataset file parsers ---

class ParseError(LayerProbeError):
    """Malformed dataset file; message carries the offending line number."""

    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class BadHeader(ParseError):
    pass


class RowWidthMismatch(ParseError):
    pass


class BadLabelValue(ParseError):
    pass


class BadSplitDigit(ParseError):
    pass


class DuplicateId(ParseError):
    pass


class FieldCount(ParseError):
    pass


class NonNumeric(ParseError):
    pass


class RegionOutOfBounds(LayerProbeError):
    pass
