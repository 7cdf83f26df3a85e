"""Exception hierarchy shared by the coverlens modules."""


class CoverlensError(Exception):
    """Base class for all errors raised by coverlens."""


class WavError(CoverlensError):
    pass


class WavNotFoundError(WavError, FileNotFoundError):
    pass


class MalformedWavError(WavError, ValueError):
    pass


class UnsupportedCodecError(WavError, ValueError):
    pass


class SegmentationError(CoverlensError, ValueError):
    pass


class DimensionError(CoverlensError, ValueError):
    pass


class ManifestError(CoverlensError, ValueError):
    pass


class DatasetError(CoverlensError, ValueError):
    pass


class FeatureFileError(CoverlensError, ValueError):
    pass


class ModelFileError(CoverlensError, ValueError):
    pass
