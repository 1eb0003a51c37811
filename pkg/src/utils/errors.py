"""Exception types shared by every fraglab stage."""


class FraglabError(Exception):
    """Base class of all fraglab failures."""


class DomainError(FraglabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NumericError(FraglabError, RuntimeError):
    """A numerical routine failed to reach its tolerance.

    Extra keyword arguments are kept in ``diagnostics`` so callers can log or
    persist them next to the failing cell.
    """

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics

    def __str__(self):
        message = super().__str__()
        if not self.diagnostics:
            return message
        details = ", ".join("%s=%r" % (key, value) for key, value in sorted(self.diagnostics.items()))
        return "%s (%s)" % (message, details)


class ConfigError(FraglabError, ValueError):
    """Invalid experiment configuration."""
