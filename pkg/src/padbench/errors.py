"""Exception hierarchy shared by every stage of the pipeline."""


class PadBenchError(Exception):
    """Base class; ``stage`` names the pipeline stage that raised."""

    stage = "core"


class InvalidMetadataError(PadBenchError, ValueError):
    stage = "taxonomy"


class InvalidAnnotationError(PadBenchError, ValueError):
    stage = "taxonomy"


class MissingAnnotationError(PadBenchError, ValueError):
    stage = "registry"


class ManifestError(PadBenchError, ValueError):
    stage = "ingest"


class SplitError(PadBenchError, ValueError):
    stage = "registry"


class ProtocolError(PadBenchError, ValueError):
    stage = "protocol"


class CropError(PadBenchError, ValueError):
    stage = "extract"


class ExtractionError(PadBenchError, ValueError):
    stage = "extract"


class ChecksumError(PadBenchError, IOError):
    stage = "cache"


class TrainingError(PadBenchError, RuntimeError):
    stage = "train"


class DataError(PadBenchError, ValueError):
    stage = "train"


class DimensionError(PadBenchError, ValueError):
    stage = "score"


class MetricError(PadBenchError, ValueError):
    stage = "metrics"


class NotApplicableError(PadBenchError, ValueError):
    stage = "metrics"
