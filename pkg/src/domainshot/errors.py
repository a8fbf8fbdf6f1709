"""Exception hierarchy shared across the package."""


class DomainshotError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(DomainshotError):
    """A file does not conform to its declared binary or text format."""


class ValidationError(DomainshotError):
    """An input value, config, or loaded structure violates an invariant."""


class PipelineError(DomainshotError):
    """The labelling pipeline produced an unusable result (e.g. no games survive filtering)."""


class SamplerError(DomainshotError):
    """An episode spec is infeasible for the given dataset split."""


class ContractError(DomainshotError):
    """An internal call contract was violated (e.g. stale forward cache)."""


class TrainError(DomainshotError):
    """Training failed at runtime (e.g. non-finite loss)."""
