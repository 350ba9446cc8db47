"""Trajectory simulation with explicit approach-to-infinity markers, and Wang's path surgery.

Paths are step functions.  Infinity is never held for positive time: an
approach is recorded as a marker on the segment that starts right after it
(the restart state, or the cemetery for the minimal process).
"""

from dataclasses import dataclass, replace
import csv
import io
import math

import numpy as np

from .errors import MalformedPath, MaxEvents
from .resolvent import pi_distribution
from .states import CEMETERY_CODE, INFINITY_CODE, StatePoint, as_code
from .schemes import wang_triple
from ._tridiag import njit

__all__ = [
    "CadlagPath",
    "SimControls",
    "make_rng",
    "simulate_minimal",
    "simulate_doob",
    "wang_surgery",
    "simulate_wang_approximant",
]


class CadlagPath:
    """Right-continuous step path on ``[0, horizon)``.

    Parameters
    ----------
    times : array_like
        Segment start times, strictly increasing from 0.
    states : array_like of int
        State codes (``-1`` is the cemetery).
    markers : array_like of bool or None
        ``markers[i]`` flags an approach to infinity at ``times[i]``.  ``None``
        means the approach information is unknown; such paths can be
        evaluated but not surgered.
    horizon : float
    validate : bool
        Run :meth:`validate` on construction.
    """

    __slots__ = ("times", "states", "markers", "horizon")

    def __init__(self, times, states, markers, horizon, validate=True):
        self.times = np.asarray(times, dtype=float)
        self.states = np.asarray(states, dtype=np.int64)
        self.markers = None if markers is None else np.asarray(markers, dtype=bool)
        self.horizon = float(horizon)
        if validate:
            self.validate()

    def validate(self):
        """Check every structural invariant, raising MalformedPath on the first failure."""
        t, s = self.times, self.states
        if t.ndim != 1 or t.shape != s.shape or t.size == 0:
            raise MalformedPath("times and states must be nonempty 1-d arrays of equal length")
        if self.markers is not None and self.markers.shape != t.shape:
            raise MalformedPath("markers must align with segments")
        if not self.horizon > 0 or not math.isfinite(self.horizon):
            raise MalformedPath(f"horizon must be positive and finite, got {self.horizon}")
        if t[0] != 0.0:
            raise MalformedPath("first segment must start at time 0")
        if np.any(np.diff(t) <= 0):
            raise MalformedPath("segment start times must be strictly increasing")
        if t[-1] >= self.horizon:
            raise MalformedPath("last segment starts at or after the horizon")
        if np.any(s < CEMETERY_CODE):
            raise MalformedPath("states must be finite or the cemetery (infinity is a marker only)")
        cem = np.flatnonzero(s == CEMETERY_CODE)
        if cem.size and cem[0] != s.size - 1:
            raise MalformedPath("the cemetery must be the last segment")
        mk = self.markers if self.markers is not None else np.zeros(s.size, dtype=bool)
        if mk[0]:
            raise MalformedPath("an approach cannot occur at time 0")
        same = (s[1:] == s[:-1]) & ~mk[1:]
        if np.any(same):
            i = int(np.flatnonzero(same)[0]) + 1
            raise MalformedPath(f"segments {i - 1} and {i} share state {s[i]} without an approach between them")
        return self

    # -- views -------------------------------------------------------------------
    @property
    def events(self):
        """Approach times."""
        if self.markers is None:
            return np.empty(0)
        return self.times[self.markers]

    @property
    def absorbed(self):
        """``(time, CEMETERY)`` if the path is killed before the horizon, else None."""
        if self.states[-1] == CEMETERY_CODE:
            return float(self.times[-1]), StatePoint.from_code(CEMETERY_CODE)
        return None

    @property
    def segments(self):
        return [(float(t), StatePoint.from_code(int(s))) for t, s in zip(self.times, self.states)]

    @property
    def jump_count(self):
        return self.times.size - 1

    def __len__(self):
        return self.times.size

    def __eq__(self, other):
        if not isinstance(other, CadlagPath):
            return NotImplemented
        mk = lambda p: p.markers if p.markers is not None else np.zeros(p.times.size, bool)  # noqa: E731
        return (self.horizon == other.horizon and np.array_equal(self.times, other.times)
                and np.array_equal(self.states, other.states) and np.array_equal(mk(self), mk(other)))

    def __repr__(self):
        return (f"CadlagPath(segments={len(self)}, approaches={self.events.size}, "
                f"horizon={self.horizon:g}, absorbed={self.absorbed is not None})")

    def eval(self, t):
        """State codes at times ``t``; beyond the horizon the last state persists."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ValueError("times must be nonnegative")
        idx = np.searchsorted(self.times, t, side="right") - 1
        return self.states[idx]

    def holding_times(self):
        """Durations of the segments (the last one is cut by the horizon)."""
        return np.diff(np.append(self.times, self.horizon))

    # -- serialization -----------------------------------------------------------
    def to_csv(self):
        buf = io.StringIO()
        buf.write(f"# horizon={self.horizon!r}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t_start", "state", "is_approach_marker"])
        mk = self.markers if self.markers is not None else np.zeros(self.times.size, bool)
        for t, s, m in zip(self.times, self.states, mk):
            w.writerow([repr(float(t)), int(s), int(bool(m))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        lines = text.splitlines()
        if not lines or not lines[0].startswith("# horizon="):
            raise MalformedPath("path CSV must start with a '# horizon=' line")
        horizon = float(lines[0].split("=", 1)[1])
        rd = csv.reader(lines[1:])
        if next(rd, None) != ["t_start", "state", "is_approach_marker"]:
            raise MalformedPath("path CSV header must be t_start,state,is_approach_marker")
        t, s, m = [], [], []
        for row in rd:
            if not row:
                continue
            try:
                t.append(float(row[0]))
                s.append(int(row[1]))
                m.append(bool(int(row[2])))
            except (ValueError, IndexError) as exc:
                raise MalformedPath(f"bad path row {row}: {exc}") from None
        return cls(t, s, m, horizon)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_csv())

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_csv(fh.read())


@dataclass(frozen=True)
class SimControls:
    """Simulation controls.

    ``cap`` is the level at which an approach to infinity is declared; the
    remaining passage time from there is added as its expected value.
    """

    cap: int = 256
    horizon: float = 10.0
    rng_seed: int = 0
    max_events: int = 10**6

    def __post_init__(self):
        if self.cap < 8:
            raise ValueError("cap must be >= 8")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.max_events < 1:
            raise ValueError("max_events must be positive")

    def with_seed(self, seed):
        return replace(self, rng_seed=int(seed))


def make_rng(seed):
    """Counter-based generator for one path."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


@njit(cache=True, nogil=True)
def _simulate(gen, i0, horizon, b, q, cap, resid, cdf, doob, max_events, times, states, markers):
    # returns the number of segments, or -1 when max_events is exceeded
    n = 0
    t = 0.0
    k = i0
    mark = False
    jumps = 0
    while t < horizon:
        if n > 0 and times[n - 1] == t:
            n -= 1  # zero-length segment: overwrite
            mark = mark or markers[n]
        if n > 0 and not mark and states[n - 1] == k:
            pass  # same state continues (only after an overwrite)
        else:
            times[n] = t
            states[n] = k
            markers[n] = mark
            n += 1
        mark = False
        if k < 0:
            break
        if k >= cap:
            t += resid[min(k, resid.size - 1)]
            if t >= horizon:
                break
            mark = True
            if doob:
                u = gen.random()
                j = np.searchsorted(cdf, u, side="right")
                if j >= cdf.size:
                    j = cdf.size - 1
                k = j - 1
            else:
                k = -1
            continue
        t += gen.standard_exponential() / q[k]
        if t >= horizon:
            break
        if gen.random() * q[k] < b[k]:
            k += 1
        else:
            k -= 1
        jumps += 1
        if jumps > max_events:
            return -1
    return n


def _prepare(rates, table, ctrl, top=0):
    cap = min(int(ctrl.cap), rates.safe_level(int(ctrl.cap)))
    if cap < 8:
        raise ValueError(f"rates overflow below level 8 (safe level {cap})")
    a, b, q = rates.arrays(cap)
    top = max(cap, int(top))
    resid = 2.0 * np.asarray(table.w(np.arange(top + 1)), dtype=float)
    if not np.all(np.isfinite(resid[cap:])):
        raise ValueError("boundary must be Regular or Exit: the passage time to infinity is infinite")
    return cap, b, q, resid


def _run(gen, i0, ctrl, cap, b, q, resid, cdf, doob, index=None):
    size = ctrl.max_events + 2
    times = np.empty(size)
    states = np.empty(size, dtype=np.int64)
    markers = np.empty(size, dtype=np.bool_)
    n = _simulate(gen, int(i0), float(ctrl.horizon), b, q, cap, resid, cdf, doob, int(ctrl.max_events),
                  times, states, markers)
    if n < 0:
        raise MaxEvents(ctrl.max_events, index)
    return CadlagPath(times[:n].copy(), states[:n].copy(), markers[:n].copy(), ctrl.horizon, validate=False)


def simulate_minimal(rates, table, i0, ctrl=SimControls(), rng=None):
    """Minimal process from a finite state, killed at its first approach to infinity.

    Holding times at ``k`` are exponential with rate ``q_k``; the chain moves
    up with probability ``b_k/q_k``.  On reaching ``ctrl.cap`` the expected
    remaining passage time ``2 w_cap`` is added, an approach is marked and the
    path is absorbed in the cemetery.
    """
    i0 = as_code(i0)
    if i0 < 0:
        raise ValueError("the minimal process starts from a finite state")
    cap, b, q, resid = _prepare(rates, table, ctrl, i0)
    gen = rng if rng is not None else make_rng(ctrl.rng_seed)
    return _run(gen, i0, ctrl, cap, b, q, resid, np.zeros(1), False)


def simulate_doob(rates, table, triple, i0, ctrl=SimControls(), rng=None, pi=None):
    """Doob process: minimal legs pieced together by restarts drawn from ``pi``.

    Raises
    ------
    NotDoob
        Unless ``beta = 0`` and ``0 < |nu| < inf``.
    """
    pi = pi_distribution(triple) if pi is None else pi
    i0 = as_code(i0)
    if i0 == INFINITY_CODE:
        raise ValueError("start from a finite state or the cemetery")
    cdf = np.concatenate([[pi.p_cem], pi.cdf_with_cemetery()])
    cap, b, q, resid = _prepare(rates, table, ctrl, max(i0, cdf.size))
    gen = rng if rng is not None else make_rng(ctrl.rng_seed)
    return _run(gen, i0, ctrl, cap, b, q, resid, cdf, True)


def _append(out_t, out_s, out_m, t, s, mark):
    """Append a segment, collapsing pieces that rounding has shrunk to zero length."""
    while out_t and t <= out_t[-1]:
        out_t.pop()
        out_s.pop()
        mark = out_m.pop() or mark
    if out_s and out_s[-1] == s and not mark:
        return
    if not out_t:
        t, mark = 0.0, False
    out_t.append(t)
    out_s.append(s)
    out_m.append(mark)


def wang_surgery(path, n):
    """Excise every excursion from an approach until the next entry to ``{0..n, ∂}``.

    With ``eta_m`` the first approach at or after ``sigma_{m-1}`` and
    ``sigma_m`` the first time from ``eta_m`` on with state in ``{0..n, ∂}``,
    the windows ``[eta_m, sigma_m)`` are removed and the rest is shifted left.
    The output horizon is the surviving duration.

    Raises
    ------
    MalformedPath
        If the path carries no approach information.
    """
    if path.markers is None:
        raise MalformedPath("surgery needs explicit approach markers")
    if n < 0:
        raise ValueError("n must be nonnegative")
    t, s, mk = path.times, path.states, path.markers
    keep = lambda st: st <= n  # noqa: E731  (cemetery code -1 included)
    out_t, out_s, out_m = [], [], []
    shift = 0.0
    eta = None
    for i in range(t.size):
        if eta is not None:
            if not keep(s[i]):
                continue
            shift += t[i] - eta
            eta = None
            mark = bool(mk[i])
        elif mk[i] and not keep(s[i]):
            eta = t[i]
            continue
        else:
            mark = bool(mk[i])
        _append(out_t, out_s, out_m, t[i] - shift, int(s[i]), mark)
    horizon = path.horizon - shift - (path.horizon - eta if eta is not None else 0.0)
    return CadlagPath(out_t, out_s, out_m, horizon)


def simulate_wang_approximant(rates, table, triple, n, i0, ctrl=SimControls(), rng=None):
    """Simulate the Doob approximant with triple ``wang_triple(triple, n)``."""
    return simulate_doob(rates, table, wang_triple(rates, table, triple, n), i0, ctrl, rng)
