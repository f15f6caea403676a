"""Exception hierarchy shared across iacforge."""

from __future__ import annotations


class IacForgeError(Exception):
    """Base class for all errors raised by iacforge."""


class ParseError(IacForgeError):
    def __init__(self, message: str, line: int, column: int) -> None:
        super().__init__(f"{message} (line {line}, column {column})")
        self.message = message
        self.line = line
        self.column = column


class EmptyModule(IacForgeError):
    pass


class BackendUnavailable(IacForgeError):
    """A configured external binary is missing or not executable."""


class EmptyPolicy(IacForgeError):
    pass


class PolicyError(IacForgeError):
    """A builtin policy document is malformed."""


class PolicyParseError(IacForgeError):
    """The external policy engine rejected the policy text."""


class EmptyGroup(IacForgeError):
    pass


class EmptyDataset(IacForgeError):
    pass


class MissingSlot(IacForgeError):
    def __init__(self, name: str) -> None:
        super().__init__(f"template slot {{{name}}} was not provided")
        self.name = name


class ExtractionError(IacForgeError):
    pass


class JudgeParseError(IacForgeError):
    pass


class LlmUnavailable(IacForgeError):
    """Transport-level LLM failure. Carries the partial transcript when raised from a loop."""

    def __init__(self, message: str, transcript=None) -> None:
        super().__init__(message)
        self.transcript = transcript


class InsufficientSingleModuleRepos(IacForgeError):
    pass


class IdMismatch(IacForgeError):
    def __init__(self, missing: list[str], extra: list[str]) -> None:
        parts = []
        if missing:
            parts.append(f"missing candidates for ids: {', '.join(missing)}")
        if extra:
            parts.append(f"candidates with unknown ids: {', '.join(extra)}")
        super().__init__("; ".join(parts))
        self.missing = missing
        self.extra = extra


class SizeLimit(IacForgeError):
    pass


class ConfigError(IacForgeError):
    pass
