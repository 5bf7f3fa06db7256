"""Exception hierarchy shared across the package."""

from __future__ import annotations


class HarnessError(Exception):
    """Base class for all package errors."""


class DomainError(HarnessError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class ValidationError(HarnessError, ValueError):
    """Structurally invalid record, schedule, or configuration value."""


class ConfigError(HarnessError):
    """Experiment configuration that cannot be run."""


class AgentError(HarnessError):
    """An agent could not produce a decision; sessions record this and stop."""


class TransportError(AgentError):
    """Remote endpoint unreachable or persistently failing."""


class ProtocolError(AgentError):
    """Remote endpoint answered with a body we cannot interpret."""


class RequestBudgetExceeded(AgentError):
    """The per-experiment remote request budget ran out."""


class TemplateError(HarnessError):
    """Prompt template missing data for a named placeholder."""

    def __init__(self, template: str, placeholder: str):
        self.template = template
        self.placeholder = placeholder
        super().__init__(f"template {template!r}: no value for placeholder {placeholder!r}")


class IncompleteResponseError(HarnessError):
    """Batch response did not cover every requested round."""

    def __init__(self, missing: list[int]):
        self.missing = list(missing)
        gaps = ", ".join(str(m) for m in self.missing)
        super().__init__(f"response missing rounds: {gaps}")
