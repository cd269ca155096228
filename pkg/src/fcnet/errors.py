"""Exception types raised across the package."""

from __future__ import annotations

__all__ = [
    "FCNetError",
    "InvalidNet",
    "NetFileError",
    "UnknownNode",
    "NotEnabled",
    "NotReverseFirable",
    "NotEnabledAt",
    "NotFreeChoice",
    "NotEFCN",
    "NotConflicting",
    "TooLarge",
    "Truncated",
    "HypothesisViolated",
    "InvalidRouting",
    "NotRoutedEnabled",
    "StepCapExceeded",
    "InvalidConfig",
    "InvalidTiming",
    "EventCapExceeded",
    "NotStronglyConnected",
    "MissingRoutingProb",
    "NoConvergence",
    "SpectralRadiusNotOne",
]


class FCNetError(Exception):
    """Base class for every error raised by fcnet."""


class InvalidNet(FCNetError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        lines = "; ".join(str(d) for d in self.diagnostics)
        super().__init__(f"invalid net: {lines}")


class NetFileError(FCNetError):
    """Malformed net description file."""


class UnknownNode(FCNetError, KeyError):
    def __init__(self, node):
        self.node = node
        super().__init__(f"unknown node {node!r}")

    def __str__(self) -> str:
        return self.args[0]


class NotEnabled(FCNetError):
    def __init__(self, transition):
        self.transition = transition
        super().__init__(f"transition {transition!r} is not enabled")


class NotReverseFirable(FCNetError):
    def __init__(self, transition):
        self.transition = transition
        super().__init__(f"transition {transition!r} cannot be reverse-fired")


class NotEnabledAt(FCNetError):
    def __init__(self, index, transition):
        self.index = index
        self.transition = transition
        super().__init__(f"transition {transition!r} not enabled at position {index}")


class NotFreeChoice(FCNetError):
    pass


class NotEFCN(FCNetError):
    pass


class NotConflicting(FCNetError):
    pass


class TooLarge(FCNetError):
    pass


class Truncated(FCNetError):
    """A state-space exploration hit its node cap."""


class HypothesisViolated(FCNetError):
    def __init__(self, which, detail=""):
        self.which = which
        self.detail = detail
        msg = f"hypothesis violated: {which}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class InvalidRouting(FCNetError):
    pass


class NotRoutedEnabled(FCNetError):
    def __init__(self, transition):
        self.transition = transition
        super().__init__(f"transition {transition!r} is not routed-enabled")


class StepCapExceeded(FCNetError):
    def __init__(self, cap):
        self.cap = cap
        super().__init__(f"no quiescent state within {cap} firings")


class InvalidConfig(FCNetError):
    pass


class InvalidTiming(FCNetError):
    pass


class EventCapExceeded(FCNetError):
    def __init__(self, replication, cap):
        self.replication = replication
        self.cap = cap
        super().__init__(f"replication {replication} exceeded {cap} events")


class NotStronglyConnected(FCNetError):
    pass


class MissingRoutingProb(FCNetError):
    pass


class NoConvergence(FCNetError):
    pass


class SpectralRadiusNotOne(FCNetError):
    def __init__(self, rho):
        self.rho = rho
        super().__init__(f"spectral radius estimate {rho!r} is not 1")
