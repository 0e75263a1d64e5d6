"""Exception hierarchy shared across the toolkit.

Two broad families matter to callers: problems with what the user handed us
(bad files, out-of-range parameters, instances too large for a requested
operation) and violations of internal contracts (a relaxation that should
have been feasible, a decode that is not a pseudodistribution, a survivor
set growing past its proven bound).  The command line maps the first family
to exit code 3 and the second to exit code 4.
"""


class DensecspError(Exception):
    """Base class for all toolkit errors."""


class InputError(DensecspError):
    """The caller supplied something unusable: bad file, bad parameter."""


class InstanceFormatError(InputError):
    """A serialized instance failed to parse; message carries the line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SizeBudgetError(InputError):
    """A requested object exceeds its configured size budget."""

    def __init__(self, message: str, computed_size: int):
        super().__init__(message)
        self.computed_size = computed_size


class ContractError(DensecspError):
    """An internal invariant failed; indicates a bug, not a user mistake."""


class UnsupportedConditioningError(ContractError):
    """Conditioning was requested on an event of (near) zero probability."""


class DecodeError(ContractError):
    """A relaxation solution could not be decoded into a valid pseudodistribution."""


class InfeasibleRelaxationError(ContractError):
    """The relaxation reported infeasible; it is feasible by construction."""


class SurvivorCapError(ContractError):
    """The incremental decision procedure exceeded its survivor bound."""

    def __init__(self, message: str, step: int, survivors: int, cap: int):
        super().__init__(message)
        self.step = step
        self.survivors = survivors
        self.cap = cap


class MetricError(ContractError):
    """A literal metric violated feasibility beyond tolerance."""


class DegreeBudgetError(DensecspError):
    """Conditioning would consume more degree than the pseudodistribution has.

    Deliberately outside the ContractError family: the rounding engine
    catches it and falls back to thresholding without conditioning.
    """
