"""Exception hierarchy shared by all coders and the protocol client."""


class StegoError(Exception):
    """Base class for all errors raised by this package."""


class InvalidDistributionError(StegoError):
    """A probability vector is unusable (empty support, bad normalization)."""


class CannotQuantizeError(StegoError):
    """More support tokens than integer quantization units available."""


class UnsupportedTokenError(StegoError):
    """A message or context token has zero probability under the model."""


class MessageTooLongError(StegoError):
    """Token budget exhausted before the message was fully embedded.

    Carries the partial coder state so callers can inspect how far
    encoding got before giving up.
    """

    def __init__(self, msg, tokens=None, state=None):
        super().__init__(msg)
        self.tokens = list(tokens) if tokens is not None else []
        self.state = state


class DesyncError(StegoError):
    """Decoder state diverged: wrong key, tampered cover, or model mismatch."""


class TruncatedCoverError(StegoError):
    """Cover ended before the full message could be recovered."""


class MalformedStreamError(StegoError):
    """A bit stream is not a valid compressed token sequence."""


class KeyMismatchError(StegoError):
    """Shared key material (vocabulary fingerprint, block key) disagrees."""


class ProtocolError(StegoError):
    """Model server returned an invalid or inconsistent response."""


class ContextTooLongError(ProtocolError):
    """Context exceeds the length advertised by the model server."""
