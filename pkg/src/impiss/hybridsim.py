"""Simulation of impulsive and switched impulsive systems.

Between impulses the flow is integrated with classical RK4 on a uniform grid
per interval, so every impulse time and every input breakpoint is landed on
exactly.  At an impulse time tau with index k the state is reset to
``x + g(tau, k, x, u(tau))``.  No jump is applied at the initial time, and
trajectories are right-continuous: the sample stored at tau after a jump is
the post-jump state.
"""

from __future__ import annotations

import bisect
import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import exprdsl
from .exprdsl import DomainError, Expr, NonFiniteResult
from .timing import ImpulseSeq, SwitchSeq

__all__ = [
    "ImpulsiveSystem", "SwitchedImpulsiveSystem", "InputSignal", "Trajectory",
    "JumpRecord", "MeasureFn", "SolverOptions", "ExpressionDomainError",
    "simulate", "gamma_norm", "gamma_norm_series", "measure_eval",
    "trajectory_csv", "state_vars", "input_vars", "rk4_interval",
]

FLOW, PRE_JUMP, POST_JUMP = 0, 1, 2


class ExpressionDomainError(RuntimeError):
    def __init__(self, t: float, detail: str):
        super().__init__(f"domain error at t={t!r}: {detail}")
        self.t = t
        self.detail = detail


def state_vars(n: int) -> List[str]:
    return [f"x{i + 1}" for i in range(n)]


def input_vars(m: int) -> List[str]:
    return [f"u{i + 1}" for i in range(m)]


# ------------------------------------------------------------------ systems


def _compile_flow(exprs: Sequence[Expr], n: int, m: int):
    fn = exprdsl.compile_vector(exprs, ["t"] + state_vars(n) + input_vars(m))
    return lambda t, x, u: fn(t, *x, *u)


def _compile_jump(exprs: Sequence[Expr], n: int, m: int):
    fn = exprdsl.compile_vector(exprs, ["t", "k"] + state_vars(n) + input_vars(m))
    return lambda t, k, x, u: fn(t, k, *x, *u)


def _parse_all(texts: Sequence[str], names: Sequence[str]) -> Tuple[Expr, ...]:
    return tuple(exprdsl.parse(s, names) if isinstance(s, str) else s for s in texts)


@dataclass(frozen=True, eq=False)
class ImpulsiveSystem:
    """x' = f(t, x, u) off gamma, x(tau) = x(tau-) + g(tau, k, x(tau-), u(tau))."""

    flow: Tuple[Expr, ...]
    jump: Tuple[Expr, ...]
    gamma: ImpulseSeq
    n: int
    m: int = 1
    _f: Callable = field(default=None, repr=False)
    _g: Callable = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.flow) != self.n or len(self.jump) != self.n:
            raise ValueError("flow and jump maps need one expression per state")
        object.__setattr__(self, "_f", _compile_flow(self.flow, self.n, self.m))
        object.__setattr__(self, "_g", _compile_jump(self.jump, self.n, self.m))

    @classmethod
    def from_text(cls, flow: Sequence[str], jump: Sequence[str], gamma: ImpulseSeq,
                  m: int = 1) -> "ImpulsiveSystem":
        n = len(flow)
        fv = ["t"] + state_vars(n) + input_vars(m)
        gv = ["t", "k"] + state_vars(n) + input_vars(m)
        return cls(_parse_all(flow, fv), _parse_all(jump, gv), gamma, n, m)

    def with_gamma(self, gamma: ImpulseSeq) -> "ImpulsiveSystem":
        return ImpulsiveSystem(self.flow, self.jump, gamma, self.n, self.m)

    def flow_at(self, mode: int):
        return self._f

    def jump_at(self, k: int):
        return self._g

    @property
    def impulses(self) -> ImpulseSeq:
        return self.gamma


@dataclass(frozen=True, eq=False)
class SwitchedImpulsiveSystem:
    """Flow maps indexed by flow mode, jump maps indexed by jump mode, both
    selected by the switching signal ``sigma``."""

    flows: Mapping[int, Tuple[Expr, ...]]
    jumps: Mapping[int, Tuple[Expr, ...]]
    sigma: SwitchSeq
    n: int
    m: int = 1
    _fs: Dict[int, Callable] = field(default=None, repr=False)
    _gs: Dict[int, Callable] = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_fs", {k: _compile_flow(v, self.n, self.m)
                                         for k, v in self.flows.items()})
        object.__setattr__(self, "_gs", {k: _compile_jump(v, self.n, self.m)
                                         for k, v in self.jumps.items()})
        for mode in set(self.sigma.flow_modes):
            if mode not in self._fs:
                raise ValueError(f"switching signal uses unknown flow mode {mode}")
        for mode in set(self.sigma.jump_modes):
            if mode not in self._gs:
                raise ValueError(f"switching signal uses unknown jump mode {mode}")

    @classmethod
    def from_text(cls, flows: Mapping[int, Sequence[str]], jumps: Mapping[int, Sequence[str]],
                  sigma: SwitchSeq, m: int = 1) -> "SwitchedImpulsiveSystem":
        n = len(next(iter(flows.values())))
        fv = ["t"] + state_vars(n) + input_vars(m)
        gv = ["t", "k"] + state_vars(n) + input_vars(m)
        return cls({k: _parse_all(v, fv) for k, v in flows.items()},
                   {k: _parse_all(v, gv) for k, v in jumps.items()}, sigma, n, m)

    def with_sigma(self, sigma: SwitchSeq) -> "SwitchedImpulsiveSystem":
        return SwitchedImpulsiveSystem(self.flows, self.jumps, sigma, self.n, self.m)

    def flow_at(self, mode: int):
        return self._fs[mode]

    def jump_at(self, k: int):
        return self._gs[self.sigma.jump_modes[k - 1]]

    @property
    def impulses(self) -> ImpulseSeq:
        return self.sigma.gamma


# -------------------------------------------------------------------- input


@dataclass(frozen=True, eq=False)
class InputSignal:
    """Piecewise-constant, right-continuous input plus explicit values at
    selected instants (used at impulse times)."""

    starts: Tuple[float, ...]
    values: Tuple[Tuple[float, ...], ...]
    overrides: Mapping[float, Tuple[float, ...]] = field(default_factory=dict)
    m: int = 1

    def __post_init__(self):
        if len(self.starts) != len(self.values):
            raise ValueError("one value per segment start")
        if any(b <= a for a, b in zip(self.starts, self.starts[1:])):
            raise ValueError("segment starts must increase")
        for v in list(self.values) + list(self.overrides.values()):
            if len(v) != self.m:
                raise ValueError("input value has wrong dimension")

    @classmethod
    def zero(cls, m: int = 1) -> "InputSignal":
        return cls((), (), {}, m)

    @classmethod
    def constant(cls, value: Sequence[float]) -> "InputSignal":
        v = tuple(float(x) for x in value)
        return cls((-math.inf,), (v,), {}, len(v))

    def value_at(self, t: float) -> Tuple[float, ...]:
        i = bisect.bisect_right(self.starts, t) - 1
        if i < 0:
            return (0.0,) * self.m
        return self.values[i]

    def at_impulse(self, t: float) -> Tuple[float, ...]:
        if t in self.overrides:
            return self.overrides[t]
        return self.value_at(t)

    def breakpoints(self, t0: float, t1: float) -> List[float]:
        return [s for s in self.starts if t0 < s < t1]

    def to_dict(self) -> dict:
        return {"starts": [s if math.isfinite(s) else None for s in self.starts],
                "values": [list(v) for v in self.values],
                "overrides": {repr(k): list(v) for k, v in sorted(self.overrides.items())}}


def gamma_norm(u: InputSignal, gamma: Optional[ImpulseSeq], t0: float, t: float) -> float:
    """max(ess sup of |u| on (t0, t], sup of |u(tau)| over impulses in (t0, t])."""
    if t <= t0:
        return 0.0
    best = 0.0
    starts = list(u.starts)
    if not starts or starts[0] > t0:
        pass  # zero before the first segment
    for i, s in enumerate(starts):
        end = starts[i + 1] if i + 1 < len(starts) else math.inf
        if s < t and end > t0:
            best = max(best, math.sqrt(sum(v * v for v in u.values[i])))
    if gamma is not None:
        for tau in gamma.within(t0, t):
            best = max(best, math.sqrt(sum(v * v for v in u.at_impulse(float(tau)))))
    return best


def gamma_norm_series(u: InputSignal, gamma: Optional[ImpulseSeq], t0: float,
                      ts: np.ndarray, kinds: np.ndarray) -> np.ndarray:
    """gamma_norm over (t0, t] at each sample; pre-jump samples exclude the
    impulse instant itself."""
    starts = list(u.starts)
    eff, norms = [], []
    for i, s in enumerate(starts):
        end = starts[i + 1] if i + 1 < len(starts) else math.inf
        if end > t0:
            eff.append(max(s, t0))
            norms.append(math.sqrt(sum(v * v for v in u.values[i])))
    eff_a = np.asarray(eff, float)
    seg_max = np.maximum.accumulate(np.asarray(norms, float)) if norms else np.zeros(0)
    idx = np.searchsorted(eff_a, ts, "left")  # segments starting strictly before t
    out = np.where(idx > 0, seg_max[np.maximum(idx - 1, 0)] if norms else 0.0, 0.0)
    if gamma is not None and len(gamma):
        imp = gamma.within(t0, float(np.max(ts)) if ts.size else t0)
        if imp.size:
            inorm = np.maximum.accumulate(np.array(
                [math.sqrt(sum(v * v for v in u.at_impulse(float(x)))) for x in imp]))
            right = np.searchsorted(imp, ts, "right")
            left = np.searchsorted(imp, ts, "left")
            cnt = np.where(kinds == PRE_JUMP, left, right)
            out = np.maximum(out, np.where(cnt > 0, inorm[np.maximum(cnt - 1, 0)], 0.0))
    return out


# --------------------------------------------------------------- trajectory


@dataclass(frozen=True)
class JumpRecord:
    t: float
    k: int
    x_minus: Tuple[float, ...]
    x_plus: Tuple[float, ...]
    mode: Optional[Tuple[int, int, int]] = None


@dataclass
class Trajectory:
    t0: float
    x0: Tuple[float, ...]
    n: int
    segments: List[Tuple[np.ndarray, np.ndarray]]
    jumps: List[JumpRecord]
    status: str = "completed"
    t_end: float = 0.0
    t_escape: Optional[float] = None
    segment_modes: List[int] = field(default_factory=list)

    def points(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All samples (times, states, kinds); kinds flag pre/post jump sides."""
        ts, xs, ks = [], [], []
        jump_times = {j.t for j in self.jumps}
        for i, (t, x) in enumerate(self.segments):
            kind = np.zeros(t.size, dtype=int)
            if i > 0 and t[0] in jump_times:
                kind[0] = POST_JUMP
            if i + 1 < len(self.segments) and t[-1] in jump_times:
                kind[-1] = PRE_JUMP
            ts.append(t)
            xs.append(x)
            ks.append(kind)
        if not ts:
            return np.zeros(0), np.zeros((0, self.n)), np.zeros(0, dtype=int)
        return np.concatenate(ts), np.concatenate(xs), np.concatenate(ks)

    @property
    def final_state(self) -> Tuple[float, ...]:
        return tuple(float(v) for v in self.segments[-1][1][-1])

    def state_at(self, t: float) -> Tuple[float, ...]:
        """Right-continuous value at a stored sample time."""
        ts, xs, _ = self.points()
        i = int(np.searchsorted(ts, t, "right")) - 1
        if i < 0 or ts[i] != t:
            raise KeyError(f"no sample at t={t!r}")
        return tuple(float(v) for v in xs[i])


def trajectory_csv(traj: Trajectory) -> str:
    """CSV with columns t, x1..xn, is_jump.  A jump appears as two rows at the
    same time, pre-jump first; a status comment closes the file."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + state_vars(traj.n) + ["is_jump"])
    ts, xs, ks = traj.points()
    for t, x, k in zip(ts, xs, ks):
        w.writerow([repr(float(t))] + [repr(float(v)) for v in x] + [1 if k else 0])
    tail = f"# status={traj.status},t_end={traj.t_end!r}"
    if traj.t_escape is not None:
        tail += f",t_escape={traj.t_escape!r}"
    buf.write(tail + "\n")
    return buf.getvalue()


# ------------------------------------------------------------------ solver


@dataclass(frozen=True)
class SolverOptions:
    h0: float = 1e-3
    escape_norm: float = 1e9
    escape_tol: float = 1e-4


def _norm(x: Sequence[float]) -> float:
    return math.sqrt(sum(v * v for v in x))


def _rk4_step(f, t, x, h, u):
    k1 = f(t, x, u)
    k2 = f(t + 0.5 * h, tuple(a + 0.5 * h * b for a, b in zip(x, k1)), u)
    k3 = f(t + 0.5 * h, tuple(a + 0.5 * h * b for a, b in zip(x, k2)), u)
    k4 = f(t + h, tuple(a + h * b for a, b in zip(x, k3)), u)
    return tuple(a + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
                 for a, b1, b2, b3, b4 in zip(x, k1, k2, k3, k4))


def _ok(x, limit) -> bool:
    return all(math.isfinite(v) for v in x) and _norm(x) <= limit


def _escapes(f, t, x, h, u, limit, substeps=16) -> bool:
    hs = h / substeps
    try:
        for i in range(substeps):
            x = _rk4_step(f, t + i * hs, x, hs, u)
            if not _ok(x, limit):
                return True
    except (NonFiniteResult, OverflowError):
        return True
    return False


def rk4_interval(f, a: float, b: float, x: Tuple[float, ...], u, opts: SolverOptions):
    """Integrate on [a, b] with a uniform grid no coarser than ``opts.h0``.

    Returns (times, states, escape_time or None).  On escape the arrays end at
    the last finite state and the escape time is refined by bisection.
    """
    steps = max(1, math.ceil((b - a) / opts.h0 - 1e-9))
    h = (b - a) / steps
    ts, xs = [a], [x]
    for i in range(steps):
        t = a + i * h
        t_next = b if i + 1 == steps else a + (i + 1) * h
        try:
            x_new = _rk4_step(f, t, x, t_next - t, u)
            good = _ok(x_new, opts.escape_norm)
        except (NonFiniteResult, OverflowError):
            good = False
        except DomainError as exc:
            raise ExpressionDomainError(t, str(exc)) from None
        if not good:
            lo, hi = 0.0, t_next - t
            while hi - lo > opts.escape_tol:
                mid = 0.5 * (lo + hi)
                if _escapes(f, t, x, mid, u, opts.escape_norm):
                    hi = mid
                else:
                    lo = mid
            return ts, xs, t + hi
        x = x_new
        ts.append(t_next)
        xs.append(x)
    return ts, xs, None


def simulate(sys, t0: float, x0: Sequence[float], u: Optional[InputSignal], t_end: float,
             opts: SolverOptions = SolverOptions()) -> Trajectory:
    """Simulate ``sys`` (impulsive or switched) on [t0, t_end]."""
    x = tuple(float(v) for v in x0)
    if len(x) != sys.n:
        raise ValueError("initial state has wrong dimension")
    if u is None:
        u = InputSignal.zero(sys.m)
    gamma = sys.impulses
    switched = isinstance(sys, SwitchedImpulsiveSystem)
    impulses = [float(v) for v in gamma.within(t0, t_end)]
    events = sorted(set(impulses) | set(u.breakpoints(t0, t_end)) | {t_end})
    k_of = {tau: i for i, tau in enumerate(impulses, start=int(np.searchsorted(gamma.array, t0, "right")) + 1)}
    segments, jumps, modes = [], [], []
    cur_t, cur_ts, cur_xs = t0, [], []
    mode = sys.sigma.mode_at(t0) if switched else 0
    for ev in events:
        if ev <= cur_t:
            continue
        f = sys.flow_at(mode)
        ts, xs, esc = rk4_interval(f, cur_t, ev, x, u.value_at(cur_t), opts)
        if cur_ts:
            ts, xs = ts[1:], xs[1:]
        cur_ts.extend(ts)
        cur_xs.extend(xs)
        if esc is not None:
            segments.append((np.asarray(cur_ts), np.asarray(cur_xs, float).reshape(-1, sys.n)))
            modes.append(mode)
            return Trajectory(t0, tuple(x0), sys.n, segments, jumps, "escaped",
                              cur_ts[-1], esc, modes)
        x = xs[-1]
        cur_t = ev
        if ev in k_of:
            k = k_of[ev]
            g = sys.jump_at(k)
            uj = u.at_impulse(ev)
            try:
                delta = g(ev, float(k), x, uj)
            except NonFiniteResult:
                delta = (math.inf,) * sys.n
            except DomainError as exc:
                raise ExpressionDomainError(ev, str(exc)) from None
            x_plus = tuple(a + b for a, b in zip(x, delta))
            segments.append((np.asarray(cur_ts), np.asarray(cur_xs, float).reshape(-1, sys.n)))
            modes.append(mode)
            triple = sys.sigma.triple(k) if switched else None
            jumps.append(JumpRecord(ev, k, x, x_plus, triple))
            if not _ok(x_plus, opts.escape_norm):
                return Trajectory(t0, tuple(x0), sys.n, segments, jumps, "escaped", ev, ev, modes)
            x = x_plus
            if switched:
                mode = sys.sigma.flow_modes[k]
            cur_ts, cur_xs = [ev], [x]
    segments.append((np.asarray(cur_ts), np.asarray(cur_xs, float).reshape(-1, sys.n)))
    modes.append(mode)
    return Trajectory(t0, tuple(x0), sys.n, segments, jumps, "completed", t_end, None, modes)


# ---------------------------------------------------------------- measures


@dataclass(frozen=True, eq=False)
class MeasureFn:
    """Scalar function of (t, x1..xn)."""

    body: Expr
    n: int
    _fn: Callable = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_fn", exprdsl.compile_expr(self.body, ["t"] + state_vars(self.n)))

    @classmethod
    def from_text(cls, text: str, n: int) -> "MeasureFn":
        return cls(exprdsl.parse(text, ["t"] + state_vars(n)), n)

    def __call__(self, t: float, x: Sequence[float]) -> float:
        return self._fn(float(t), *(float(v) for v in x))


def measure_eval(h: MeasureFn, traj: Trajectory) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    ts, xs, ks = traj.points()
    vals = np.array([h(t, x) for t, x in zip(ts, xs)])
    return ts, vals, ks
