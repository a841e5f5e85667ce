"""Scalar comparison systems and their stability evidence.

A comparison system is the differential inclusion z' in (-inf, -phi(t, z)],
z(tau) in [0, alpha(tau, z(tau-))].  ``solve_equation`` integrates the
extremal solution (equality in both relations); ``sample_inclusion`` draws
other solutions by adding random extra decay during flow and scaling jumps by
a random fraction.  Solutions are clamped at 0.

Flow rates are expressions in (t, z); jump bounds are expressions in
(t, z, k) where k is the 1-based index of the impulse.  Mode-dependent data
use mappings keyed by flow mode (rates) or by (mode before, mode after, jump
mode) triples (jumps), with the key ``None`` as a fallback.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from . import exprdsl
from .exprdsl import DomainError, Expr, NonFiniteResult
from .funcspace import MonotonePW, SontagKL, sontag_eval
from .hybridsim import (POST_JUMP, PRE_JUMP, ExpressionDomainError, ImpulsiveSystem, JumpRecord,
                        SolverOptions, Trajectory)
from .timing import ImpulseSeq, SwitchSeq, generate

__all__ = [
    "ComparisonSystem", "GuasEnvelope", "GuasReport", "FitResult",
    "solve_equation", "sample_inclusion", "solve_example2", "example2_comparison",
    "example2_p_text", "example2_system", "guas_check", "fit_envelope", "effective_times",
]

RATE_VARS = ["t", "z"]
JUMP_VARS = ["t", "z", "k"]


def _as_expr(x, names):
    return exprdsl.parse(x, names) if isinstance(x, str) else x


@dataclass(frozen=True, eq=False)
class ComparisonSystem:
    rate: Union[Expr, Mapping[Optional[int], Expr]]
    jump: Union[Expr, Mapping[Optional[Tuple[int, int, int]], Expr]]
    gamma: Optional[ImpulseSeq] = None
    sigma: Optional[SwitchSeq] = None
    monotone_jump: bool = False
    _rates: Dict = field(default=None, repr=False)
    _jumps: Dict = field(default=None, repr=False)

    def __post_init__(self):
        if (self.gamma is None) == (self.sigma is None):
            raise ValueError("give exactly one of gamma or sigma")
        rates = self.rate if isinstance(self.rate, Mapping) else {None: self.rate}
        jumps = self.jump if isinstance(self.jump, Mapping) else {None: self.jump}
        object.__setattr__(self, "_rates", {k: exprdsl.compile_expr(_as_expr(v, RATE_VARS), RATE_VARS)
                                            for k, v in rates.items()})
        object.__setattr__(self, "_jumps", {k: exprdsl.compile_expr(_as_expr(v, JUMP_VARS), JUMP_VARS)
                                            for k, v in jumps.items()})

    @classmethod
    def from_text(cls, rate, jump, gamma=None, sigma=None, monotone_jump=False):
        conv = (lambda d, names: {k: _as_expr(v, names) for k, v in d.items()}
                if isinstance(d, Mapping) else _as_expr(d, names))
        return cls(conv(rate, RATE_VARS), conv(jump, JUMP_VARS), gamma, sigma, monotone_jump)

    @property
    def impulses(self) -> ImpulseSeq:
        return self.gamma if self.gamma is not None else self.sigma.gamma

    def with_gamma(self, gamma: ImpulseSeq) -> "ComparisonSystem":
        return ComparisonSystem(self.rate, self.jump, gamma, None, self.monotone_jump)

    def rate_fn(self, mode: Optional[int]) -> Callable[[float, float], float]:
        return self._rates.get(mode, self._rates.get(None))

    def jump_fn(self, k: int) -> Callable[[float, float, float], float]:
        if self.sigma is None:
            return self._jumps[None]
        tr = self.sigma.triple(k)
        return self._jumps.get(tr, self._jumps.get(None))

    def mode_at(self, t: float) -> Optional[int]:
        return None if self.sigma is None else self.sigma.mode_at(t)

    def check_monotone_jump(self, r_grid: Sequence[float] = tuple(np.logspace(-4, 4, 60)),
                            max_impulses: int = 20) -> bool:
        """Spot-check that alpha(t, r) is nondecreasing in r at impulse times."""
        for k, tau in enumerate(self.impulses.times[:max_impulses], start=1):
            fn = self.jump_fn(k)
            vals = [fn(tau, float(r), float(k)) for r in r_grid]
            if any(b < a for a, b in zip(vals, vals[1:])):
                return False
        return True


# ------------------------------------------------------------------ solver


def _interval_steps(a: float, b: float, h0: float) -> int:
    return max(1, math.ceil((b - a) / h0 - 1e-9))


def _solve(cs: ComparisonSystem, t0: float, z0: float, t_end: float, opts: SolverOptions,
           rng: Optional[np.random.Generator], decay_mean: float) -> Trajectory:
    if z0 < 0:
        raise ValueError("comparison solutions start at z0 >= 0")
    gamma = cs.impulses
    impulses = [float(v) for v in gamma.within(t0, t_end)]
    events = impulses + ([t_end] if not impulses or impulses[-1] != t_end else [])
    imp = set(impulses)
    z = float(z0)
    segments, jumps = [], []
    cur_ts, cur_zs = [t0], [z]
    a = t0
    for ev in events:
        rate = cs.rate_fn(cs.mode_at(a))
        steps = _interval_steps(a, ev, opts.h0)
        h = (ev - a) / steps
        for i in range(steps):
            t = a + i * h
            t_next = ev if i + 1 == steps else a + (i + 1) * h
            hs = t_next - t
            extra = rng.exponential(decay_mean) if rng is not None and decay_mean > 0 else 0.0
            try:
                z_new = _rk4_clamped(rate, t, z, hs, extra)
            except NonFiniteResult:
                z_new = math.inf
            except DomainError as exc:
                raise ExpressionDomainError(t, str(exc)) from None
            if not (math.isfinite(z_new) and z_new <= opts.escape_norm):
                t_esc = _refine_escape(rate, t, z, hs, extra, opts)
                segments.append((np.asarray(cur_ts), np.asarray(cur_zs).reshape(-1, 1)))
                return Trajectory(t0, (z0,), 1, segments, jumps, "escaped", cur_ts[-1], t_esc)
            z = z_new
            cur_ts.append(t_next)
            cur_zs.append(z)
        a = ev
        if ev in imp:
            k = gamma.index_of(ev)
            try:
                target = cs.jump_fn(k)(ev, z, float(k))
            except DomainError as exc:
                raise ExpressionDomainError(ev, str(exc)) from None
            if rng is not None:
                target = rng.uniform(0.0, 1.0) * target
            z_plus = target if target > 0.0 else 0.0
            segments.append((np.asarray(cur_ts), np.asarray(cur_zs).reshape(-1, 1)))
            triple = cs.sigma.triple(k) if cs.sigma is not None else None
            jumps.append(JumpRecord(ev, k, (z,), (z_plus,), triple))
            z = z_plus
            cur_ts, cur_zs = [ev], [z]
    segments.append((np.asarray(cur_ts), np.asarray(cur_zs).reshape(-1, 1)))
    return Trajectory(t0, (z0,), 1, segments, jumps, "completed", t_end, None)


def _rk4_clamped(rate, t, z, h, extra):
    """One RK4 step of z' = -(phi + extra*|phi|), stages clamped at 0."""
    th = t + 0.5 * h
    if extra:
        p = rate(t, z)
        k1 = -(p + extra * abs(p))
        z2 = z + 0.5 * h * k1
        p = rate(th, z2 if z2 > 0.0 else 0.0)
        k2 = -(p + extra * abs(p))
        z3 = z + 0.5 * h * k2
        p = rate(th, z3 if z3 > 0.0 else 0.0)
        k3 = -(p + extra * abs(p))
        z4 = z + h * k3
        p = rate(t + h, z4 if z4 > 0.0 else 0.0)
        k4 = -(p + extra * abs(p))
    else:
        k1 = -rate(t, z)
        z2 = z + 0.5 * h * k1
        k2 = -rate(th, z2 if z2 > 0.0 else 0.0)
        z3 = z + 0.5 * h * k2
        k3 = -rate(th, z3 if z3 > 0.0 else 0.0)
        z4 = z + h * k3
        k4 = -rate(t + h, z4 if z4 > 0.0 else 0.0)
    z_new = z + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return z_new if z_new > 0.0 else 0.0


def _refine_escape(rate, t, z, h, extra, opts: SolverOptions) -> float:
    def escapes(span):
        zz = z
        sub = span / 16
        try:
            for i in range(16):
                zz = _rk4_clamped(rate, t + i * sub, zz, sub, extra)
                if not (math.isfinite(zz) and zz <= opts.escape_norm):
                    return True
        except (NonFiniteResult, OverflowError):
            return True
        return False
    lo, hi = 0.0, h
    while hi - lo > opts.escape_tol:
        mid = 0.5 * (lo + hi)
        if escapes(mid):
            hi = mid
        else:
            lo = mid
    return t + hi


def solve_equation(cs: ComparisonSystem, t0: float, z0: float, t_end: float,
                   opts: SolverOptions = SolverOptions()) -> Trajectory:
    """Extremal solution: z' = -phi(t, z), z(tau) = alpha(tau, z(tau-))."""
    return _solve(cs, t0, z0, t_end, opts, None, 0.0)


def sample_inclusion(cs: ComparisonSystem, t0: float, z0: float, t_end: float, seed: int,
                     opts: SolverOptions = SolverOptions(), decay_mean: float = 1.0) -> Trajectory:
    """A random solution of the inclusion.

    On every step the flow is z' = -(phi + m |phi|) with m ~ Exp(decay_mean);
    at impulses z(tau) = U * alpha(tau, z(tau-)) with U ~ Uniform[0, 1].
    """
    return _solve(cs, t0, z0, t_end, opts, np.random.default_rng(seed), decay_mean)


# ------------------------------------------------------------ scalar family


def example2_p_text(lam: float, r: str, eta: str) -> str:
    """Jump pre-image p(r, k): undo one flow interval, capped by eta."""
    L = repr(float(lam))
    thr = f"(({L}*k/({L}-1))^(1/({L}-1)))"
    q = f"((({r})^(1-{L}) - ({L}-1)/({L}*k))^(1/(1-{L})))"
    return f"if_le({r}, 0, 0, if_le({thr}, {r}, {r}, min({eta}, {q})))"


def _eta_of(eta_text: str, arg: str) -> str:
    node = exprdsl.parse(eta_text, ["r"])
    return exprdsl.to_text(exprdsl.substitute(node, {"r": exprdsl.parse(arg, ["z", "x1"])}))


def example2_comparison(lam: float, gamma: ImpulseSeq, eta_text: str = "r") -> ComparisonSystem:
    """w' = -w^lam, w(tau_k) = p(w(tau_k-), k) exp(-1/(lam k))."""
    L = repr(float(lam))
    p = example2_p_text(lam, "z", _eta_of(eta_text, "z"))
    return ComparisonSystem.from_text(f"z^{L}", f"{p} * exp(-1/({L}*k))", gamma=gamma,
                                      monotone_jump=True)


def example2_system(lam: float, horizon: float, eta_text: str = "r"):
    """The scalar plant behind the family: x' = -2|x|^lam sign(x) + u^lam with
    jumps that rescale |x| to p(|x|, k) exp(-1/(lam k)).  Inputs must be >= 0."""
    L = repr(float(lam))
    p = example2_p_text(lam, "abs(x1)", _eta_of(eta_text, "abs(x1)"))
    gamma = generate("example2", horizon, lam=lam)
    return ImpulsiveSystem.from_text([f"-2*abs(x1)^{L}*sign(x1) + u1^{L}"],
                                     [f"-x1 + sign(x1)*{p}*exp(-1/({L}*k))"], gamma)


def _flow_closed(lam: float, wa: float, dt: float) -> float:
    if wa <= 0.0:
        return 0.0
    return (wa ** (1.0 - lam) + (lam - 1.0) * dt) ** (1.0 / (1.0 - lam))


def _p_closed(lam: float, r: float, k: int, eta: Callable[[float], float]) -> float:
    if r <= 0.0:
        return 0.0
    thr = (lam * k / (lam - 1.0)) ** (1.0 / (lam - 1.0))
    if thr <= r:
        return r
    q = (r ** (1.0 - lam) - (lam - 1.0) / (lam * k)) ** (1.0 / (1.0 - lam))
    return min(eta(r), q)


def solve_example2(lam: float, t0: float, w0: float, t_end: float,
                   eta: Callable[[float], float] = lambda r: r,
                   h0: float = 1e-3, gamma: Optional[ImpulseSeq] = None) -> Trajectory:
    """Closed-form solution of the scalar family sampled on the solver grid."""
    if not lam > 1:
        raise ValueError("lam must exceed 1")
    if gamma is None:
        gamma = generate("example2", t_end, lam=lam)
    impulses = [float(v) for v in gamma.within(t0, t_end)]
    events = impulses + ([t_end] if not impulses or impulses[-1] != t_end else [])
    imp = set(impulses)
    w = float(w0)
    segments, jumps = [], []
    cur_ts, cur_ws = [t0], [w]
    a = t0
    for ev in events:
        steps = _interval_steps(a, ev, h0)
        h = (ev - a) / steps
        wa = w
        for i in range(steps):
            t_next = ev if i + 1 == steps else a + (i + 1) * h
            w = _flow_closed(lam, wa, t_next - a)
            cur_ts.append(t_next)
            cur_ws.append(w)
        a = ev
        if ev in imp:
            k = gamma.index_of(ev)
            w_plus = _p_closed(lam, w, k, eta) * math.exp(-1 / (lam * k))
            segments.append((np.asarray(cur_ts), np.asarray(cur_ws).reshape(-1, 1)))
            jumps.append(JumpRecord(ev, k, (w,), (w_plus,)))
            w = w_plus
            cur_ts, cur_ws = [ev], [w]
    segments.append((np.asarray(cur_ts), np.asarray(cur_ws).reshape(-1, 1)))
    return Trajectory(t0, (float(w0),), 1, segments, jumps, "completed", t_end, None)


# ------------------------------------------------------------ GUAS checks


@dataclass(frozen=True, eq=False)
class GuasEnvelope:
    beta: SontagKL
    mode: str = "weak"  # weak: beta(z0, t - t0); strong: beta(z0, t - t0 + n)

    def __post_init__(self):
        if self.mode not in ("weak", "strong"):
            raise ValueError("mode is weak or strong")


@dataclass(frozen=True)
class GuasReport:
    passed: bool
    worst_margin: float
    witness: Optional[Dict[str, float]] = None


def effective_times(traj: Trajectory, gamma: ImpulseSeq, mode: str):
    """Sample times, values, kinds and elapsed time (plus jumps for strong)."""
    ts, xs, kinds = traj.points()
    s = ts - traj.t0
    if mode == "strong":
        a = gamma.array
        lo = np.searchsorted(a, traj.t0, "right")
        right = np.searchsorted(a, ts, "right")
        left = np.searchsorted(a, ts, "left")
        n = np.where(kinds == PRE_JUMP, left, right) - lo
        s = s + np.maximum(n, 0)
    return ts, xs, kinds, s


def guas_check(ensemble: Sequence[Tuple[Trajectory, ImpulseSeq]], env: GuasEnvelope,
               tol: float = 1e-9) -> GuasReport:
    """z(t) <= beta(z0, t - t0 [+ n(t0, t]]) at every sample and both jump sides."""
    worst, wit = math.inf, None
    for idx, (traj, gamma) in enumerate(ensemble):
        ts, xs, kinds, s = effective_times(traj, gamma, env.mode)
        z0 = traj.x0[0]
        bound = sontag_eval(env.beta, np.full(s.shape, z0), s)
        margin = bound - xs[:, 0]
        scale = np.maximum(1.0, np.abs(bound))
        rel = margin / scale
        j = int(np.argmin(rel))
        if rel[j] < worst:
            worst = float(rel[j])
            wit = {"trajectory": idx, "t": float(ts[j]), "z": float(xs[j, 0]),
                   "bound": float(bound[j]), "z0": float(z0), "t0": traj.t0}
    return GuasReport(worst >= -tol, worst, wit)


@dataclass
class FitResult:
    verdict: str  # fits | diverges | no_fit
    envelope: Optional[GuasEnvelope]
    rate: Optional[float] = None
    witness: Optional[Dict[str, float]] = None


def fit_envelope(ensemble: Sequence[Tuple[Trajectory, ImpulseSeq]], mode: str = "weak",
                 fit_fraction: float = 0.5,
                 rates: Sequence[float] = tuple(np.logspace(1, -3, 41)),
                 tol: float = 1e-9) -> FitResult:
    """Fit beta(r, s) = a2(r) exp(-rate s) on the early part of each trajectory
    and accept the fastest rate whose fit also bounds the rest.

    The gain a2 is the piecewise-linear majorant through the observed
    (z0, gain) pairs.  Validation on the unseen later part is what turns the
    fit into evidence rather than a tautology.
    """
    data = []
    for traj, gamma in ensemble:
        ts, xs, kinds, s = effective_times(traj, gamma, mode)
        data.append((traj.x0[0], ts - traj.t0, s, xs[:, 0]))
    horizon = max(float(d[1][-1]) for d in data)
    cut = fit_fraction * horizon
    nonzero = [d for d in data if d[0] > 0]
    if not nonzero:
        raise ValueError("ensemble needs a positive initial value")
    for rate in rates:
        gains: Dict[float, float] = {}
        ok = True
        with np.errstate(over="ignore"):
            for z0, el, s, z in nonzero:
                m = el <= cut
                g = float(np.max(z[m] * np.exp(rate * s[m])))
                if not math.isfinite(g):
                    ok = False
                    break
                gains[z0] = max(gains.get(z0, 0.0), g)
        if not ok:
            continue
        r0 = sorted(gains)
        g = np.maximum.accumulate([gains[r] for r in r0])
        ys = [0.0]
        for r, gv in zip(r0, g):
            ys.append(max(gv * (1 + 1e-6), ys[-1] * (1 + 1e-12) + 1e-300))
        a2 = MonotonePW.from_points([0.0] + r0, ys, tail_slope=ys[-1] / r0[-1])
        beta = SontagKL(MonotonePW.identity(), a2, rate)
        env = GuasEnvelope(beta, mode)
        rep = guas_check(ensemble, env, tol)
        if rep.passed:
            return FitResult("fits", env, rate)
    # no rate validated: decide between growth and mere lack of evidence
    growth, wit = 0.0, None
    for i, (z0, el, s, z) in enumerate(nonzero):
        late = z[el > cut]
        if late.size and z0 > 0:
            ratio = float(np.max(late) / z0)
            if ratio > growth:
                growth, wit = ratio, {"trajectory": i, "z0": z0, "max_late": float(np.max(late))}
    if growth > 1.0:
        return FitResult("diverges", None, None, wit)
    return FitResult("no_fit", None, None, wit)
