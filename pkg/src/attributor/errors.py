"""Exception hierarchy shared by every stage of the attribution pipeline."""

from __future__ import annotations


class AttributorError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInput(AttributorError, ValueError):
    pass


class EmptyInput(InvalidInput):
    pass


class DuplicateId(InvalidInput):
    def __init__(self, ident: str, message: str | None = None):
        super().__init__(message or f"duplicate id: {ident!r}")
        self.ident = ident


class DimensionMismatch(InvalidInput):
    pass


class MixedClaimIds(InvalidInput):
    pass


class GranularityMismatch(InvalidInput):
    pass


class CorpusMismatch(InvalidInput):
    pass


class ZeroSentences(InvalidInput):
    pass


class ConfigError(AttributorError):
    pass


class CorpusError(AttributorError):
    pass


class MalformedRecord(CorpusError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


# -- backend failures -------------------------------------------------------


class BackendError(AttributorError):
    pass


class BackendUnreachable(BackendError):
    pass


class BackendMiss(BackendError):
    """The mock backend has no mapping, or an offline cache has no entry."""


class OfflineCacheMiss(BackendMiss):
    pass


class BudgetExceeded(BackendError):
    pass


class QuotaExceeded(BackendError):
    pass


# -- reply parsing ----------------------------------------------------------


class ReplyFormatError(AttributorError):
    pass


class MalformedListReply(ReplyFormatError):
    pass


class UnparseableVerdict(ReplyFormatError):
    def __init__(self, reply: str, expected: str):
        super().__init__(f"cannot parse {reply!r} as {expected}")
        self.reply = reply


# -- page fetching ----------------------------------------------------------


class FetchError(AttributorError):
    def __init__(self, url: str, message: str):
        super().__init__(f"{url}: {message}")
        self.url = url


class FetchTimeout(FetchError):
    def __init__(self, url: str):
        super().__init__(url, "timed out")


class HttpError(FetchError):
    def __init__(self, url: str, status: int):
        super().__init__(url, f"HTTP {status}")
        self.status = status


class NonHtmlContent(FetchError):
    def __init__(self, url: str, content_type: str):
        super().__init__(url, f"non-HTML content type {content_type!r}")
        self.content_type = content_type


class DuplicateRecordId(DuplicateId, CorpusError):
    pass


class CorpusIOError(CorpusError):
    pass
