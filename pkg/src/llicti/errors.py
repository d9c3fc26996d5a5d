"""Exception types raised by the codec.

Plain argument, range and shape problems raise ``ValueError``; the classes
here cover the cases callers usually want to tell apart.
"""


class FormatError(ValueError):
    """A bitstream or weight file is not something we can read.

    Raised for bad magic, unknown version, checksum or config mismatch.
    """


class CorruptStreamError(ValueError):
    """The payload is damaged: truncated, trailing garbage or desynced."""
