"""Exception types shared across the engine.

Every domain error derives from SpadaError so callers (CLI, wire API) can map
the whole family onto exit codes and HTTP statuses without enumerating it.
"""

from __future__ import annotations


class SpadaError(Exception):
    """Base class for all engine errors."""


# -- catalog -----------------------------------------------------------------

class InvalidSetup(SpadaError):
    pass


class UnknownSource(SpadaError):
    pass


class EmptyDescription(SpadaError):
    pass


class DuplicateThreat(SpadaError):
    pass


class UnknownThreat(SpadaError):
    pass


class DuplicateAsset(SpadaError):
    pass


class UnknownAsset(SpadaError):
    pass


class DomainIndependentMode(SpadaError):
    """Asset collection attempted while the setup has no application domain."""


# -- operation log -----------------------------------------------------------

class NotActive(SpadaError):
    pass


class TooFewMembers(SpadaError):
    pass


class NotDomainDependent(SpadaError):
    pass


class StillDomainDependent(SpadaError):
    pass


class NotDomainIndependent(SpadaError):
    pass


class DuplicateCombination(SpadaError):
    pass


class EmptyAssetList(SpadaError):
    pass


class LedgerError(SpadaError):
    pass


class ReplayError(SpadaError):
    """Replay failed at a specific record.

    Carries the sequence number of the offending record and the underlying
    cause so tooling can point at the exact ledger line.
    """

    def __init__(self, seq: int, cause: str):
        self.seq = seq
        self.cause = cause
        super().__init__(f"replay failed at seq {seq}: {cause}")


# -- embracer ----------------------------------------------------------------

class InvalidThreshold(SpadaError):
    pass


class StaleSuggestion(SpadaError):
    """Suggestion no longer matches the catalog it was computed against."""


class UnknownSuggestion(SpadaError):
    pass


# -- reporting ---------------------------------------------------------------

class EmptyFlow(SpadaError):
    pass
