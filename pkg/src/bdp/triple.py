"""Boundary parameter triples (gamma, beta, nu) and their admissibility."""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import Inconclusive, MalformedDescriptor
from .measures import Measure, Scaled, build_measure, zero_measure

__all__ = ["ParameterTriple", "AdmissibilityReport", "check_admissible", "weighted_tail_series"]


@dataclass(frozen=True, eq=False)
class ParameterTriple:
    """Killing weight ``gamma``, reflecting weight ``beta`` and jumping measure ``nu``."""

    gamma: float
    beta: float
    nu: Measure = field(default_factory=zero_measure)

    def __post_init__(self):
        if not (self.gamma >= 0 and math.isfinite(self.gamma)):
            raise MalformedDescriptor(f"gamma must be finite and >= 0, got {self.gamma}")
        if not (self.beta >= 0 and math.isfinite(self.beta)):
            raise MalformedDescriptor(f"beta must be finite and >= 0, got {self.beta}")
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "nu", build_measure(self.nu))

    @property
    def nu_mass(self):
        return self.nu.total_mass

    @property
    def is_doob(self):
        """beta = 0 and 0 < |nu| < inf."""
        m = self.nu_mass
        return self.beta == 0 and 0 < m < math.inf

    @property
    def is_reduced_minimal(self):
        """gamma > 0 with beta = |nu| = 0: same resolvent as the minimal process."""
        return self.gamma > 0 and self.beta == 0 and self.nu_mass == 0

    def scaled(self, M):
        return ParameterTriple(M * self.gamma, M * self.beta, Scaled(self.nu, M))

    @property
    def descriptor(self):
        return {"gamma": self.gamma, "beta": self.beta, "nu": getattr(self.nu, "descriptor", repr(self.nu))}

    def __repr__(self):
        return f"ParameterTriple(gamma={self.gamma}, beta={self.beta}, nu={self.nu!r})"


def weighted_tail_series(nu, values_fn, majorant_fn, tol, K0=64, budget=2**16):
    """Sum ``sum_k nu_k g_k`` for a nonnegative sequence with a geometric majorant.

    Parameters
    ----------
    nu : Measure
    values_fn : callable
        ``values_fn(k_array) -> g_k``.
    majorant_fn : callable
        ``majorant_fn(K) -> [(coef, ratio, deg), ...]`` bounding ``g_{K+j}``.
    tol : float
        Target for the tail bound.

    Returns
    -------
    value, bound, K
        Prefix sum over ``k < K`` and the certified bound on the rest.
    """
    if nu.support_max is not None:
        K = nu.support_max + 1
        k = np.arange(K)
        return float(np.sum(nu.weights(k) * values_fn(k))) if K else 0.0, 0.0, K
    K = K0
    while True:
        bound = nu.series_bound(K, majorant_fn(K))
        if bound < tol or K >= budget:
            break
        K *= 2
    k = np.arange(K)
    value = float(np.sum(nu.weights(k) * values_fn(k)))
    if not bound < tol:
        if math.isfinite(bound):
            return value, bound, K
        raise Inconclusive("nu-series", f"no finite tail bound at prefix {K}")
    return value, bound, K


@dataclass(frozen=True)
class AdmissibilityReport:
    """Per-clause outcome of the admissibility conditions.

    ``b1_value`` is the double series ``sum_k nu_k w_k`` (prefix part) and
    ``b1_bound`` the certified bound on what was left out.
    """

    b1_value: float
    b1_bound: float
    clauses: dict
    admissible: bool
    reduced_minimal: bool

    def rows(self):
        yield ("B1_series", self.b1_value, self.b1_bound, self.clauses["series_finite"])
        yield ("mass_nonzero", float(self.clauses["mass_nonzero"]), 0.0, self.clauses["mass_nonzero"])
        yield ("exit_no_reflection", float(self.clauses["exit_no_reflection"]), 0.0, self.clauses["exit_no_reflection"])


def check_admissible(triple, table, boundary, tol=1e-10):
    """Check the series condition, ``|nu| + beta != 0`` and ``beta = 0`` at an exit.

    Parameters
    ----------
    triple : ParameterTriple
    table : ScaleSpeedTable
    boundary : BoundaryClass
        Must be Regular or Exit.
    tol : float
        Required bound on the unsummed tail of the double series.

    Raises
    ------
    Inconclusive
        If the double-series tail cannot be pushed below ``tol``.
    """
    if boundary.kind not in ("Regular", "Exit"):
        raise ValueError(f"admissibility is defined for Regular or Exit boundaries, got {boundary.kind}")
    value, bound, _ = weighted_tail_series(
        triple.nu, table.w, table.w_majorant, tol, K0=max(64, table.tail_start)
    )
    if not bound < tol:
        raise Inconclusive("B1", f"tail bound {bound:.3g} not below {tol:.3g}")
    clauses = {
        "series_finite": math.isfinite(value),
        "mass_nonzero": (triple.nu_mass + triple.beta) != 0,
        "exit_no_reflection": not (boundary.kind == "Exit" and triple.beta != 0),
    }
    return AdmissibilityReport(
        value, bound, clauses, all(clauses.values()), triple.is_reduced_minimal
    )
