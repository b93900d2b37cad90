"""Exception types shared across the package."""


class PtcError(Exception):
    """Base class for every error raised by ptc_forge."""


class InvalidArgument(PtcError, ValueError):
    pass


class InvalidPermutation(InvalidArgument):
    pass


class InvalidPartition(InvalidArgument):
    pass


class IllegalGene(PtcError, ValueError):
    """A gene broke one of its legality rules.

    ``rule`` names the first rule that failed so callers can report it.
    """

    def __init__(self, rule: str, detail: str = ""):
        self.rule = rule
        self.detail = detail
        super().__init__(f"{rule}: {detail}" if detail else rule)


class NotApplicable(PtcError):
    """An operator cannot act on the given gene segment."""


class InfeasibleConstraints(PtcError):
    """No constraint-satisfying gene was found within the retry budget."""

    def __init__(self, binding: str, detail: str = ""):
        self.binding = binding
        super().__init__(f"infeasible constraints (binding: {binding}) {detail}".rstrip())


class MissingPdkEntry(PtcError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "missing pdk entry"


class InvalidPdk(PtcError, ValueError):
    pass
