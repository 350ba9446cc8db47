"""Exception hierarchy.

Every error carries a module-qualified ``code`` (``"<module>.<Name>"``) so the
command line runner can report it without knowing the concrete class.
"""


class BDPError(Exception):
    module = "bdp"

    @property
    def code(self):
        return f"{self.module}.{type(self).__name__}"


# chain-core

class ChainCoreError(BDPError):
    module = "chain-core"


class NonPositiveRate(ChainCoreError, ValueError):
    def __init__(self, k, which):
        self.k = k
        self.which = which
        super().__init__(f"rate {which}({k}) must be positive")


class MalformedDescriptor(ChainCoreError, ValueError):
    pass


class Overflow(ChainCoreError, ArithmeticError):
    def __init__(self, k, what="mu/c"):
        self.k = k
        super().__init__(f"{what} leaves the double range at k={k}")


class Inconclusive(ChainCoreError):
    def __init__(self, what, detail=""):
        self.what = what
        super().__init__(f"cannot certify {what}" + (f": {detail}" if detail else ""))


# resolvent-engine

class ResolventError(BDPError):
    module = "resolvent-engine"


class NoConvergence(ResolventError):
    def __init__(self, nmax, rel_change=None):
        self.nmax = nmax
        self.rel_change = rel_change
        msg = f"truncated solve did not converge up to N={nmax}"
        if rel_change is not None:
            msg += f" (last relative change {rel_change:.3g})"
        super().__init__(msg)


class CrossCheckFailed(ResolventError):
    def __init__(self, i, gap):
        self.i = i
        self.gap = gap
        super().__init__(f"u_min routes disagree at i={i} by {gap:.3g}")


class InadmissibleTriple(ResolventError, ValueError):
    pass


class DivergentSeries(ResolventError):
    pass


class NotDoob(ResolventError, ValueError):
    pass


class TailUnbounded(ResolventError):
    pass


class InversionUnstable(ResolventError):
    pass


# approx-schemes

class SchemeError(BDPError):
    module = "approx-schemes"


class CInfUnavailable(SchemeError):
    pass


class ZeroDenominator(SchemeError, ZeroDivisionError):
    pass


# pathsim

class PathError(BDPError):
    module = "pathsim"


class MaxEvents(PathError):
    def __init__(self, limit, index=None):
        self.limit = limit
        self.index = index
        where = "" if index is None else f" (path {index})"
        super().__init__(f"more than {limit} events{where}")


class MalformedPath(PathError, ValueError):
    pass


# mc-lab

class MCError(BDPError):
    module = "mc-lab"


class HorizonExceeded(MCError, ValueError):
    pass


# cli

class CLIError(BDPError):
    module = "cli"


class ParseError(CLIError):
    def __init__(self, line, reason):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class ValidationError(CLIError, ValueError):
    def __init__(self, key, reason):
        self.key = key
        self.reason = reason
        super().__init__(f"{key}: {reason}")
