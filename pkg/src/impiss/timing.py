"""Impulse-time sequences, switching signals and dwell-time classes.

Counting convention: ``count_jumps(g, s, t)`` is the number of impulse times
in the half-open window (s, t].  Class membership over a finite horizon is
decided exactly by scanning the finitely many extremal windows, whose end
points sit at 0, the horizon, or just before/after an impulse time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .funcspace import MonotonePW

__all__ = [
    "ImpulseSeq", "SwitchSeq", "DwellClassSpec", "Membership", "ActivationStats",
    "GenerationFailed", "InvalidSwitching", "count_jumps", "classify",
    "uib_profile", "uib_majorant", "uib_evidence", "generate",
    "cyclic_switching", "random_switching", "activation_stats",
]

CLASS_TOL = 1e-9


class GenerationFailed(RuntimeError):
    pass


class InvalidSwitching(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ImpulseSeq:
    times: Tuple[float, ...]
    horizon: float

    def __post_init__(self):
        ts = tuple(float(t) for t in self.times)
        object.__setattr__(self, "times", ts)
        if any(t <= 0 for t in ts[:1]):
            raise ValueError("impulse times must be positive")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("impulse times must be strictly increasing")
        if ts and ts[-1] > self.horizon:
            raise ValueError("impulse time beyond horizon")
        object.__setattr__(self, "_arr", np.asarray(ts, dtype=float))

    @property
    def array(self) -> np.ndarray:
        return self._arr  # type: ignore[attr-defined]

    def __len__(self):
        return len(self.times)

    def count(self, s: float, t: float) -> int:
        return count_jumps(self, s, t)

    def within(self, s: float, t: float) -> np.ndarray:
        """Impulse times in (s, t]."""
        a = self.array
        return a[np.searchsorted(a, s, "right"):np.searchsorted(a, t, "right")]

    def index_of(self, t: float) -> int:
        """1-based index k with times[k-1] == t, or 0 when t is not an impulse."""
        i = int(np.searchsorted(self.array, t, "left"))
        if i < len(self.times) and self.times[i] == t:
            return i + 1
        return 0

    def to_dict(self) -> dict:
        return {"times": list(self.times), "horizon": self.horizon}


def count_jumps(gamma: ImpulseSeq, s: float, t: float) -> int:
    if t <= s:
        return 0
    a = gamma.array
    return int(np.searchsorted(a, t, "right") - np.searchsorted(a, s, "right"))


# ----------------------------------------------------------- dwell classes


@dataclass(frozen=True)
class DwellClassSpec:
    """kind is one of adt, radt, min_dwell, max_dwell, uib."""

    kind: str
    n0: float = 0.0
    tau_d: float = 1.0
    theta: float = 1.0
    profile: Optional[MonotonePW] = None

    def __post_init__(self):
        if self.kind not in ("adt", "radt", "min_dwell", "max_dwell", "uib"):
            raise ValueError(f"unknown class kind {self.kind!r}")
        if self.kind in ("adt", "radt") and not (self.tau_d > 0 and self.n0 >= 0):
            raise ValueError("need tau_d > 0 and N0 >= 0")
        if self.kind in ("min_dwell", "max_dwell") and not self.theta > 0:
            raise ValueError("need theta > 0")
        if self.kind == "uib" and self.profile is None:
            raise ValueError("uib class needs a profile")


@dataclass(frozen=True)
class Membership:
    member: bool
    slack: float
    witness: Optional[Tuple[float, float]] = None


def _adt(ts: np.ndarray, n0: float, tau: float) -> Membership:
    if ts.size == 0:
        return Membership(True, n0)
    idx = np.arange(ts.size)
    lead = ts / tau - idx
    best = np.maximum.accumulate(lead)
    arg = np.zeros(ts.size, dtype=int)
    cur = 0
    for j in range(ts.size):
        if lead[j] >= lead[cur]:
            cur = j
        arg[j] = cur
    vals = idx + 1 - ts / tau + best
    j = int(np.argmax(vals))
    worst = float(vals[j])
    if worst <= n0 + CLASS_TOL:
        return Membership(True, n0 - worst)
    i = int(arg[j])
    prev = ts[i - 1] if i > 0 else 0.0
    delta = min(0.5 * (ts[i] - prev), 0.5 * tau * (worst - n0))
    return Membership(False, n0 - worst, (float(ts[i] - delta), float(ts[j])))


def _radt(ts: np.ndarray, horizon: float, n0: float, tau: float) -> Membership:
    ext = np.concatenate([[0.0], ts])
    idx = np.arange(ext.size)
    lead = ext / tau - idx
    best = np.minimum.accumulate(lead)
    worst, win = math.inf, None
    # windows (E_i, E_j) with E_j a jump, excluded
    if ts.size:
        j = idx[1:]
        vals = j - 1 - ext[1:] / tau + best[:-1]
        k = int(np.argmin(vals))
        if vals[k] < worst:
            i = int(np.argmin(lead[:k + 1]))
            worst, win = float(vals[k]), (float(ext[i]), float(ext[k + 1]))
    # windows (E_i, horizon]
    tail = (ts.size - idx) - (horizon - ext) / tau
    k = int(np.argmin(tail))
    if tail[k] < worst:
        worst, win = float(tail[k]), (float(ext[k]), float(horizon))
    if worst >= -n0 - CLASS_TOL:
        return Membership(True, worst + n0)
    return Membership(False, worst + n0, win)


def _uib(ts: np.ndarray, profile: MonotonePW) -> Membership:
    worst, win = math.inf, None
    for j in range(ts.size):
        width = ts[j] - ts[: j + 1]
        bound = profile(width)
        counts = j + 1 - np.arange(j + 1)
        slack = bound - counts
        i = int(np.argmin(slack))
        if slack[i] < worst:
            worst, win = float(slack[i]), (float(ts[i]), float(ts[j]))
    if ts.size == 0 or worst >= -CLASS_TOL:
        return Membership(True, worst if ts.size else math.inf)
    return Membership(False, worst, win)


def classify(gamma: ImpulseSeq, spec: DwellClassSpec) -> Membership:
    """Exact membership test over the horizon of ``gamma``."""
    ts = gamma.array
    if spec.kind == "adt":
        return _adt(ts, spec.n0, spec.tau_d)
    if spec.kind == "radt":
        return _radt(ts, gamma.horizon, spec.n0, spec.tau_d)
    if spec.kind == "uib":
        return _uib(ts, spec.profile)
    gaps = np.diff(np.concatenate([[0.0], ts]))
    if spec.kind == "min_dwell":
        if gaps.size == 0:
            return Membership(True, math.inf)
        slack = float(np.min(gaps) - spec.theta)
        if slack >= -CLASS_TOL * max(1.0, spec.theta):
            return Membership(True, slack)
        # report the earliest offending gap
        k = int(np.argmax(gaps - spec.theta < -CLASS_TOL * max(1.0, spec.theta)))
        start = ts[k - 1] if k > 0 else 0.0
        return Membership(False, slack, (float(start), float(ts[k])))
    # max_dwell: includes the open gap from the last impulse to the horizon
    gaps = np.diff(np.concatenate([[0.0], ts, [gamma.horizon]]))
    slack = float(spec.theta - np.max(gaps))
    if slack >= -CLASS_TOL * max(1.0, spec.theta):
        return Membership(True, slack)
    k = int(np.argmax(spec.theta - gaps < -CLASS_TOL * max(1.0, spec.theta)))
    ends = np.concatenate([[0.0], ts, [gamma.horizon]])
    return Membership(False, slack, (float(ends[k]), float(ends[k + 1])))


# ------------------------------------------------------------- UIB profile


def uib_profile(gammas: Sequence[ImpulseSeq], deltas: Sequence[float]) -> np.ndarray:
    """Largest number of impulses in any window (t0, t0 + delta]."""
    out = np.zeros(len(deltas), dtype=int)
    for g in gammas:
        a = g.array
        if a.size == 0:
            continue
        for m, d in enumerate(deltas):
            if d <= 0:
                continue
            ends = np.searchsorted(a, a + d, "left")
            out[m] = max(out[m], int(np.max(ends - np.arange(a.size))))
    return out


def uib_majorant(deltas: Sequence[float], counts: Sequence[float]) -> MonotonePW:
    """Continuous nondecreasing bound through the upper corners of a profile.

    On (d_i, d_{i+1}] the count is at most counts[i+1], so the line through
    (d_i, counts[i+1]) dominates the step profile.  Past the grid the bound
    grows with the largest average rate seen over the upper half of the grid.
    """
    d = np.asarray(deltas, float)
    c = np.asarray(counts, float)
    if d[0] != 0.0 or d.size < 3:
        raise ValueError("profile grid must start at 0 and have at least 3 points")
    upper = d.size // 2
    rate = float(np.max(c[upper:] / d[upper:]))
    ys = list(c[1:]) + [c[-1] + rate * (d[-1] - d[-2])]
    ys = list(np.maximum.accumulate(ys))
    return MonotonePW.from_points(d, ys, tail_slope=max(rate, 1e-12))


def uib_evidence(gamma: ImpulseSeq, delta: float, n_splits: int = 3) -> Dict[str, object]:
    """Window counts restricted to successive sub-horizons.

    A profile that keeps growing from one sub-horizon to the next is evidence
    against a uniform bound.
    """
    a = gamma.array
    edges = np.linspace(0.0, gamma.horizon, n_splits + 1)
    counts = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        # windows (t0, t0 + delta] with t0 in [lo, hi)
        first = np.searchsorted(a, lo, "right")
        last = np.searchsorted(a, hi, "right")
        if last <= first or a.size == 0:
            counts.append(0)
            continue
        starts = np.arange(first, min(last + 1, a.size))
        ends = np.searchsorted(a, a[starts] + delta, "left")
        counts.append(int(np.max(ends - starts)))
    growing = all(b > a_ for a_, b in zip(counts, counts[1:])) and counts[-1] >= 2 * max(counts[0], 1)
    return {"counts": counts, "bounded": not growing}


# -------------------------------------------------------------- generators


def _cumulative(increments: np.ndarray, horizon: float) -> np.ndarray:
    ts = np.cumsum(increments)
    return ts[ts <= horizon]


def generate(kind: str, horizon: float, seed: Optional[int] = None,
             max_events: int = 2_000_000, **params) -> ImpulseSeq:
    """Impulse-time generators.

    kinds: periodic(period), harmonic, example2(lam), adt_random(n0, tau_d),
    radt_random(n0, tau_d), min_dwell_random(theta, spread),
    max_dwell_random(theta).
    """
    rng = np.random.default_rng(seed)
    if kind == "periodic":
        p = float(params["period"])
        k = int(math.floor(horizon / p + 1e-12))
        if k > max_events:
            raise GenerationFailed(f"{k} events exceed the budget of {max_events}")
        ts = [i * p for i in range(1, k + 1) if i * p <= horizon]
        return ImpulseSeq(tuple(ts), horizon)
    if kind in ("harmonic", "example2"):
        lam = 1.0 if kind == "harmonic" else float(params["lam"])
        # tau_k = H_k / lam, H_k ~ ln k + 0.5772
        est = math.exp(lam * horizon - 0.5772156649) + 16
        if est > max_events:
            raise GenerationFailed(f"about {est:.3g} events exceed the budget of {max_events}")
        k = np.arange(1, int(est) + 1, dtype=float)
        ts = _cumulative(1.0 / (lam * k), horizon)
        return ImpulseSeq(tuple(ts.tolist()), horizon)
    if kind == "adt_random":
        return _adt_random(float(params["n0"]), float(params["tau_d"]), horizon, rng,
                           int(params.get("budget", 10_000)))
    if kind == "radt_random":
        return _radt_random(float(params["n0"]), float(params["tau_d"]), horizon, rng,
                            int(params.get("budget", 10_000)))
    if kind == "min_dwell_random":
        theta = float(params["theta"])
        spread = float(params.get("spread", 1.0))
        ts, t = [], 0.0
        while True:
            t = t + theta + rng.exponential(theta * spread)
            if t > horizon:
                break
            ts.append(t)
        return ImpulseSeq(tuple(ts), horizon)
    if kind == "max_dwell_random":
        theta = float(params["theta"])
        low = float(params.get("low", 0.1))
        ts, t = [], 0.0
        while True:
            t = t + rng.uniform(low * theta, theta)
            if t > horizon:
                break
            ts.append(t)
        return ImpulseSeq(tuple(ts), horizon)
    raise ValueError(f"unknown generator kind {kind!r}")


def _adt_random(n0, tau, horizon, rng, budget) -> ImpulseSeq:
    if n0 < 1:
        return ImpulseSeq((), horizon)
    ts: List[float] = []
    lead_max = -math.inf
    last, retries = 0.0, 0
    while True:
        t = last + rng.exponential(tau)
        if t > horizon:
            break
        k = len(ts)
        val = k + 1 - t / tau + max(lead_max, t / tau - k)
        if val <= n0:
            ts.append(t)
            lead_max = max(lead_max, t / tau - k)
            last = t
            continue
        retries += 1
        if retries > budget:
            raise GenerationFailed("rejection budget exhausted for ADT sampling")
    return ImpulseSeq(tuple(ts), horizon)


def _radt_random(n0, tau, horizon, rng, budget) -> ImpulseSeq:
    if not n0 > 0:
        # every short jump-free window would already violate the lower bound
        raise ValueError("reverse average dwell-time sequences need N0 > 0")
    ts: List[float] = []
    lead_min = 0.0  # from the start point 0 at extended index 0
    last = 0.0
    while True:
        j = len(ts) + 1
        t_max = tau * (j - 1 + n0 + lead_min)
        t = last + rng.exponential(0.8 * tau)
        if t > t_max:
            # fall back to a uniform draw in the admissible gap
            t = last + (t_max - last) * (1.0 - rng.uniform(0.0, 1.0))
        if t > horizon:
            break
        ts.append(t)
        lead_min = min(lead_min, t / tau - j)
        last = t
    return ImpulseSeq(tuple(ts), horizon)


# ---------------------------------------------------------------- switching


@dataclass(frozen=True, eq=False)
class SwitchSeq:
    """Flow mode flow_modes[k] is active on [tau_k, tau_{k+1}) (tau_0 = t0);
    jump_modes[k-1] selects the jump map applied at tau_k."""

    gamma: ImpulseSeq
    flow_modes: Tuple[int, ...]
    jump_modes: Tuple[int, ...]
    constraint: Optional[FrozenSet[Tuple[int, int, int]]] = None

    def __post_init__(self):
        object.__setattr__(self, "flow_modes", tuple(int(m) for m in self.flow_modes))
        object.__setattr__(self, "jump_modes", tuple(int(m) for m in self.jump_modes))
        k = len(self.gamma)
        if len(self.flow_modes) != k + 1 or len(self.jump_modes) != k:
            raise InvalidSwitching(
                f"need {k + 1} flow modes and {k} jump modes, got "
                f"{len(self.flow_modes)} and {len(self.jump_modes)}")
        if self.constraint is not None:
            for i in range(k):
                tr = self.triple(i + 1)
                if tr not in self.constraint:
                    raise InvalidSwitching(f"triple {tr} at t={self.gamma.times[i]} not allowed")

    def triple(self, k: int) -> Tuple[int, int, int]:
        """(mode before, mode after, jump mode) at the k-th impulse (1-based)."""
        return (self.flow_modes[k - 1], self.flow_modes[k], self.jump_modes[k - 1])

    def mode_at(self, t: float) -> int:
        return self.flow_modes[int(np.searchsorted(self.gamma.array, t, "right"))]

    def to_dict(self) -> dict:
        return {"gamma": self.gamma.to_dict(), "flow_modes": list(self.flow_modes),
                "jump_modes": list(self.jump_modes)}


def cyclic_switching(segments: Sequence[Tuple[int, float, int]], horizon: float,
                     constraint=None) -> SwitchSeq:
    """Repeat ``(flow_mode, duration, jump_mode_at_end)`` segments to the horizon.

    Impulse times are computed as cycle_index * period + offset so rounding
    does not accumulate over cycles.
    """
    durations = [float(d) for _, d, _ in segments]
    period = sum(durations)
    offsets = np.cumsum(durations)
    times, flows, jumps = [], [segments[0][0]], []
    c = 0
    while True:
        done = False
        for m, (mode, _, jmode) in enumerate(segments):
            t = c * period + float(offsets[m])
            if t > horizon:
                done = True
                break
            times.append(t)
            jumps.append(jmode)
            flows.append(segments[(m + 1) % len(segments)][0])
        if done:
            break
        c += 1
    return SwitchSeq(ImpulseSeq(tuple(times), horizon), tuple(flows), tuple(jumps), constraint)


def random_switching(gamma: ImpulseSeq, constraint: FrozenSet[Tuple[int, int, int]],
                     initial: int, seed: Optional[int] = None) -> SwitchSeq:
    """Draw allowed triples uniformly, continuing from the current flow mode."""
    rng = np.random.default_rng(seed)
    by_mode: Dict[int, List[Tuple[int, int, int]]] = {}
    for tr in sorted(constraint):
        by_mode.setdefault(tr[0], []).append(tr)
    flows, jumps = [initial], []
    for _ in gamma.times:
        options = by_mode.get(flows[-1])
        if not options:
            raise GenerationFailed(f"no allowed transition out of mode {flows[-1]}")
        tr = options[int(rng.integers(len(options)))]
        flows.append(tr[1])
        jumps.append(tr[2])
    return SwitchSeq(gamma, tuple(flows), tuple(jumps), constraint)


# ----------------------------------------------------------- activation


@dataclass(frozen=True)
class ActivationStats:
    time: Dict[str, float]
    jumps: Dict[str, int]


def activation_stats(sigma: SwitchSeq, flow_classes: Mapping[int, str],
                     jump_classes: Mapping[Tuple[int, int, int], str],
                     t0: float, t: float) -> ActivationStats:
    """Activation time of each flow class on (t0, t] and the number of jumps of
    each jump class in (t0, t].  Unlisted modes and triples count as 'n'."""
    time = {"s": 0.0, "n": 0.0, "u": 0.0}
    jumps = {"s": 0, "n": 0, "u": 0}
    edges = [t0] + [float(x) for x in sigma.gamma.within(t0, t)] + [t]
    ts = sigma.gamma.array
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        mode = sigma.flow_modes[int(np.searchsorted(ts, a, "right"))]
        time[flow_classes.get(mode, "n")] += b - a
    for tau in sigma.gamma.within(t0, t):
        k = int(np.searchsorted(ts, tau, "left")) + 1
        jumps[jump_classes.get(sigma.triple(k), "n")] += 1
    return ActivationStats(time, jumps)
