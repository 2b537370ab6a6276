class ThicklabError(Exception):
    """Base error; ``code`` is the machine-readable tag reported by the CLI."""

    code = "internal"
    exit_status = 1


class InputError(ThicklabError):
    code = "input-parse"
    exit_status = 2


class PreconditionError(ThicklabError, ValueError):
    code = "precondition"
    exit_status = 3


class BudgetError(ThicklabError):
    code = "budget"
    exit_status = 4


class VerificationError(ThicklabError):
    """A constructed object failed its own a-posteriori check."""

    code = "verification"
    exit_status = 5
