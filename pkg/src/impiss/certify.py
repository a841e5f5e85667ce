"""Checkable stability criteria, their witnesses, and envelope validation.

Each ``check_*`` function decides one sufficient condition for input-to-state
stability and returns a :class:`Certificate`.  A certificate carries the
numbers that make the verdict reproducible (decay rate ``eta``, offset ``mu``,
integral levels, ...), the margins by which the condition holds, and the grids
that were searched.

Window conditions of the form

    sum of per-jump log gains over (t0, t]  -  flow decay over (t0, t]
        <=  mu - eta * (t - t0 [+ number of jumps])

are decided by an exact scan: between events the left side is linear (or
sampled on a grid for time-varying rates), so its supremum over all windows
is attained at, or approached from, event instants.  See ``_WindowData``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from . import exprdsl
from .comparison import (ComparisonSystem, GuasEnvelope, fit_envelope, guas_check,
                         solve_equation)
from .exprdsl import DomainError, Expr
from .funcspace import (ConditionViolated, DivergenceUnverified, InvalidFunction,
                        MonotonePW, PointwiseMax, PosDefFn, SontagKL, Composite,
                        adaptive_simpson, f_transform, kinf_envelope, kl_time_shift,
                        sontag_eval, window_integral_bounds)
from .hybridsim import (PRE_JUMP, ImpulsiveSystem, InputSignal, MeasureFn, SolverOptions,
                        SwitchedImpulsiveSystem, Trajectory, gamma_norm_series,
                        input_vars, simulate, state_vars)
from .timing import (DwellClassSpec, ImpulseSeq, SwitchSeq, activation_stats, uib_evidence,
                     uib_majorant, uib_profile)

__all__ = [
    "ParameterMismatch", "SignMismatch", "PartitionIncomplete",
    "Certificate", "LyapunovHypothesis", "AssumptionGrid", "AssumptionReport",
    "sample_assumption", "check_thm2", "check_thm3", "check_cor1", "check_thm4",
    "check_thm5", "check_thm6", "contraction_map", "diffinc_oracle", "DiffIncResult",
    "lyapunov_iss_envelope", "IssGain", "IssCase", "IssReport", "iss_check",
    "FalsifyOptions", "FalsifyResult", "falsify", "certificate_beta", "window_sup",
    "cor1_witnesses",
]

ETA_GRID = tuple(np.logspace(-4, 1, 40))
MU_GRID = tuple(np.logspace(-3, 3, 40))
MARGIN_TOL = 1e-9
RATE_VARS = ["t", "r"]
GAIN_VARS = ["t", "r", "k"]


class ParameterMismatch(ValueError):
    pass


class SignMismatch(ValueError):
    pass


class PartitionIncomplete(ValueError):
    pass


# --------------------------------------------------------------- certificate


def _clean(v):
    """JSON-safe copy: non-finite floats become strings, tuples become lists."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else repr(f)
    if isinstance(v, np.integer):
        return int(v)
    return v


def _restore(v):
    if isinstance(v, dict):
        return {k: _restore(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_restore(x) for x in v]
    if v in ("inf", "-inf", "nan"):
        return float(v)
    return v


@dataclass
class Certificate:
    theorem_id: str
    verdict: str                       # holds | fails | inconclusive
    witnesses: Dict[str, float] = field(default_factory=dict)
    margins: Dict[str, float] = field(default_factory=dict)
    horizon: Optional[float] = None
    grids: Dict[str, Any] = field(default_factory=dict)
    conclusions: Dict[str, str] = field(default_factory=dict)
    reason: Optional[str] = None
    failure: Optional[Dict[str, Any]] = None
    notes: List[str] = field(default_factory=list)

    def __post_init__(self):
        if self.verdict not in ("holds", "fails", "inconclusive"):
            raise ValueError(f"bad verdict {self.verdict!r}")
        if self.verdict == "holds":
            bad = {k: v for k, v in self.margins.items() if not v > -MARGIN_TOL}
            if bad:
                raise ValueError(f"holds with non-positive margins {bad}")

    @property
    def holds(self) -> bool:
        return self.verdict == "holds"

    def to_json(self) -> str:
        return json.dumps(_clean(asdict(self)), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Certificate":
        return cls(**_restore(json.loads(text)))


def certificate_beta(cert: Certificate) -> SontagKL:
    """Comparison bound kappa * exp(mu) * r * exp(-eta s) from a window certificate."""
    w = cert.witnesses
    scale = w.get("kappa", 1.0) * math.exp(w["mu"])
    return SontagKL(MonotonePW.identity(), MonotonePW.identity(), w["eta"], scale)


# ---------------------------------------------------------------- hypothesis


def _parse(text_or_expr, names):
    return exprdsl.parse(text_or_expr, names) if isinstance(text_or_expr, str) else text_or_expr


def _class_check(name: str, fn: Callable[[float], float]) -> None:
    grid = np.logspace(-4, 4, 33)
    vals = [fn(float(r)) for r in grid]
    z = fn(0.0)
    if abs(z) > 1e-12:
        raise InvalidFunction(f"{name}(0) = {z!r}, expected 0")
    if any(not (b > a) for a, b in zip(vals, vals[1:])) or vals[0] <= 0:
        raise InvalidFunction(f"{name} is not strictly increasing and positive on the grid")


@dataclass(frozen=True, eq=False)
class LyapunovHypothesis:
    """Lyapunov data for an impulsive or switched impulsive system.

    ``V`` maps a flow mode (``None`` for non-switched systems) to an
    expression in (t, x1..xn).  ``rates`` maps a flow mode to phi(t, r) with
    the flow condition D+V <= -phi(t, V); ``jump_gains`` maps a jump key
    (``None`` or a (mode before, mode after, jump mode) triple) to alpha(t, r, k)
    with V+ <= alpha(t, V-, k).
    """

    kind: str                                       # general | switched | switched_exp
    n: int
    V: Mapping[Optional[int], Expr]
    phi1: Callable[[float], float]
    phi2: Callable[[float], float]
    chi: Callable[[float], float]
    pi: Callable[[float], float]
    rates: Mapping[Optional[int], Expr]
    jump_gains: Mapping[Optional[Tuple[int, int, int]], Expr]
    h: Optional[MeasureFn] = None
    h0: Optional[MeasureFn] = None
    flow_classes: Optional[Mapping[int, str]] = None
    jump_classes: Optional[Mapping[Tuple[int, int, int], str]] = None
    exponents: Optional[Mapping[str, float]] = None
    _V: Dict = field(default=None, repr=False)
    _rates: Dict = field(default=None, repr=False)
    _gains: Dict = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("general", "switched", "switched_exp"):
            raise ValueError(f"unknown hypothesis kind {self.kind!r}")
        for name in ("phi1", "phi2", "chi", "pi"):
            _class_check(name, getattr(self, name))
        xv = ["t"] + state_vars(self.n)
        object.__setattr__(self, "_V", {k: exprdsl.compile_expr(_parse(v, xv), xv)
                                        for k, v in self.V.items()})
        object.__setattr__(self, "_rates", {k: exprdsl.compile_expr(_parse(v, RATE_VARS), RATE_VARS)
                                            for k, v in self.rates.items()})
        object.__setattr__(self, "_gains", {k: exprdsl.compile_expr(_parse(v, GAIN_VARS), GAIN_VARS)
                                            for k, v in self.jump_gains.items()})

    @classmethod
    def general(cls, n: int, V: str, rate: str, gain: str, phi1, phi2, chi, pi,
                h: Optional[str] = None, h0: Optional[str] = None) -> "LyapunovHypothesis":
        return cls("general", n, {None: V}, phi1, phi2, chi, pi, {None: rate}, {None: gain},
                   MeasureFn.from_text(h, n) if h else None,
                   MeasureFn.from_text(h0, n) if h0 else None)

    @classmethod
    def switched_exp(cls, n: int, V: Mapping[int, str], flow_classes: Mapping[int, str],
                     jump_classes: Mapping[Tuple[int, int, int], str], c_s: float, c_u: float,
                     d_s: float, d_u: float, phi1, phi2, chi, pi,
                     h: Optional[str] = None, h0: Optional[str] = None) -> "LyapunovHypothesis":
        if not (c_s > 0 and c_u > 0 and 0 <= d_s < 1 < d_u):
            raise ParameterMismatch("need c_s, c_u > 0 and 0 <= d_s < 1 < d_u")
        rate_of = {"s": f"{c_s!r}*r", "n": "0", "u": f"-{c_u!r}*r"}
        gain_of = {"s": f"{d_s!r}*r", "n": "r", "u": f"{d_u!r}*r"}
        rates = {m: rate_of[c] for m, c in flow_classes.items()}
        gains = {tr: gain_of[c] for tr, c in jump_classes.items()}
        return cls("switched_exp", n, dict(V), phi1, phi2, chi, pi, rates, gains,
                   MeasureFn.from_text(h, n) if h else None,
                   MeasureFn.from_text(h0, n) if h0 else None,
                   dict(flow_classes), dict(jump_classes),
                   {"c_s": c_s, "c_u": c_u, "d_s": d_s, "d_u": d_u})

    def v_fn(self, mode):
        return self._V.get(mode, self._V.get(None))

    def rate_fn(self, mode):
        return self._rates.get(mode, self._rates.get(None))

    def gain_fn(self, key):
        return self._gains.get(key, self._gains.get(None))


# --------------------------------------------------------- assumption sampling


@dataclass(frozen=True)
class AssumptionGrid:
    ts: Tuple[float, ...] = (0.0, 0.5, 1.0, 2.0)
    xs: Tuple[Tuple[float, ...], ...] = ()
    us: Tuple[Tuple[float, ...], ...] = ()
    step: float = 1e-6
    slack: float = 1e-4
    max_impulses: int = 20

    def __post_init__(self):
        if not self.ts or not self.xs or not self.us:
            raise ValueError("sampling grid must be nonempty")


@dataclass
class AssumptionReport:
    verdict: str                      # not_falsified | falsified
    checked: Dict[str, int]
    skipped: int = 0
    witness: Optional[Dict[str, Any]] = None


def _norm(v: Sequence[float]) -> float:
    return math.sqrt(sum(float(a) * float(a) for a in v))


def sample_assumption(hyp: LyapunovHypothesis, sys, grid: AssumptionGrid) -> AssumptionReport:
    """Spot-check the Lyapunov conditions on a (t, x, u) grid.

    The upper-right Dini derivative is replaced by a forward difference; a
    violation is reported only when it exceeds ``slack * (1 + |rhs|)``.
    """
    checked = {"sandwich": 0, "flow": 0, "jump": 0, "jump_small": 0}
    skipped = 0
    hs, slack = grid.step, grid.slack
    switched = isinstance(sys, SwitchedImpulsiveSystem)
    modes = sorted(sys.flows) if switched else [None]

    def tol(rhs):
        return slack * (1.0 + abs(rhs))

    def fail(cond, **kw):
        kw["condition"] = cond
        return AssumptionReport("falsified", checked, skipped, kw)

    # sandwich bounds
    if hyp.h is not None and hyp.h0 is not None:
        for mode in modes:
            V = hyp.v_fn(mode)
            for t in grid.ts:
                for x in grid.xs:
                    try:
                        v = V(t, *x)
                        lo, hi = hyp.phi1(hyp.h(t, x)), hyp.phi2(hyp.h0(t, x))
                    except DomainError:
                        skipped += 1
                        continue
                    checked["sandwich"] += 1
                    if lo > v + tol(v) or v > hi + tol(hi):
                        return fail("sandwich", mode=mode, t=t, x=list(x), lhs=lo, v=v, rhs=hi)

    # flow decrease
    for mode in modes:
        V, rate = hyp.v_fn(mode), hyp.rate_fn(mode)
        f = sys.flow_at(mode)
        for t in grid.ts:
            for x in grid.xs:
                for u in grid.us:
                    try:
                        v = V(t, *x)
                        if not v >= hyp.chi(_norm(u)):
                            continue
                        fx = f(t, x, u)
                        xn = [a + hs * b for a, b in zip(x, fx)]
                        dini = (V(t + hs, *xn) - v) / hs
                        rhs = -rate(t, v)
                    except DomainError:
                        skipped += 1
                        continue
                    checked["flow"] += 1
                    if dini > rhs + tol(rhs):
                        return fail("flow", mode=mode, t=t, x=list(x), u=list(u),
                                    lhs=dini, rhs=rhs)

    # jumps: (time, k, pre-mode, post-mode, jump map, gain key)
    cases = []
    if switched:
        keys = [k for k in hyp.jump_gains if k is not None]
        if not keys:
            keys = sorted(sys.sigma.constraint or {sys.sigma.triple(k)
                                                   for k in range(1, len(sys.sigma.gamma) + 1)})
        for tr in keys:
            for t in grid.ts:
                cases.append((t, 1, tr[0], tr[1], sys._gs[tr[2]], tr))
    else:
        for k, tau in enumerate(sys.impulses.times[:grid.max_impulses], start=1):
            cases.append((tau, k, None, None, sys.jump_at(k), None))
    for t, k, pre, post, g, key in cases:
        Vm, Vp, alpha = hyp.v_fn(pre), hyp.v_fn(post), hyp.gain_fn(key)
        for x in grid.xs:
            for u in grid.us:
                try:
                    vm = Vm(t, *x)
                    gx = g(t, k, x, u)
                    vp = Vp(t, *[a + b for a, b in zip(x, gx)])
                    c = hyp.chi(_norm(u))
                except DomainError:
                    skipped += 1
                    continue
                if vm >= c:
                    try:
                        rhs = alpha(t, vm, k)
                    except DomainError:
                        skipped += 1
                        continue
                    checked["jump"] += 1
                    if vp > rhs + tol(rhs):
                        return fail("jump", key=None if key is None else list(key), t=t, k=k,
                                    x=list(x), u=list(u), lhs=vp, rhs=rhs)
                if vm <= c:
                    rhs = hyp.pi(_norm(u))
                    checked["jump_small"] += 1
                    if vp > rhs + tol(rhs):
                        return fail("jump_small", key=None if key is None else list(key), t=t,
                                    k=k, x=list(x), u=list(u), lhs=vp, rhs=rhs)
    return AssumptionReport("not_falsified", checked, skipped, None)


# ------------------------------------------------------------- window scan


@dataclass
class _WindowData:
    """Candidate window endpoints of one sequence, sorted by (time, count).

    ``psi`` is the cumulative flow decay, ``w0`` the cumulative log gain of
    the first N jumps (blocked jumps contribute 0), ``blocked`` the number of
    blocked (zero-gain) jumps among the first N.
    """

    x: np.ndarray
    n: np.ndarray
    psi: np.ndarray
    w0: np.ndarray
    blocked: np.ndarray
    horizon: float


def _candidates(times: np.ndarray, horizon: float, extra: Sequence[float] = ()) -> Tuple[np.ndarray, np.ndarray]:
    k = len(times)
    xs = [0.0]
    ns = [0]
    for i, tau in enumerate(times, start=1):
        xs += [float(tau), float(tau)]
        ns += [i - 1, i]
    pts = list(extra) + [horizon / 4, horizon / 2, horizon]
    for p in pts:
        xs.append(float(p))
        ns.append(int(np.searchsorted(times, p, "right")))
    x, n = np.asarray(xs), np.asarray(ns, dtype=int)
    order = np.lexsort((n, x))
    return x[order], n[order]


def _cum_weights(log_gains: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    lg = np.asarray(log_gains, float)
    blocked = np.isneginf(lg)
    w = np.where(blocked, 0.0, lg)
    return np.r_[0.0, np.cumsum(w)], np.r_[0, np.cumsum(blocked)]


def window_sup(data: _WindowData, eta: float, strong: bool,
               marks: Sequence[float]) -> Tuple[np.ndarray, Dict[str, float]]:
    """sup over windows (a, b] with b <= mark of
    W(b) - W(a) - (Psi(b) - Psi(a)) + eta * (b - a [+ jumps in (a, b]]).

    Returns the sup for each mark and the maximizing window for the last one.
    """
    A = data.psi - data.w0[data.n] - eta * (data.x + (data.n if strong else 0))
    grp = data.blocked[data.n]
    G = np.empty_like(A)
    arg = np.empty(A.size, dtype=int)
    starts = np.flatnonzero(np.r_[True, grp[1:] != grp[:-1]])
    ends = np.r_[starts[1:], A.size]
    for s, e in zip(starts, ends):
        seg = A[s:e]
        pm = np.maximum.accumulate(seg)
        G[s:e] = pm - seg
        # index of the running maximum (first attainment)
        idx = np.arange(s, e)
        is_new = np.r_[True, seg[1:] > pm[:-1]]
        arg[s:e] = np.maximum.accumulate(np.where(is_new, idx, s))
    run = np.maximum.accumulate(G)
    pos = np.searchsorted(data.x, np.asarray(marks, float), "right") - 1
    b = int(np.argmax(G))
    a = int(arg[b])
    win = {"t0": float(data.x[a]), "t": float(data.x[b]), "jumps": int(data.n[b] - data.n[a]),
           "value": float(G[b])}
    return run[pos], win


def _growing(s: np.ndarray) -> bool:
    s1, s2, s3 = (float(v) for v in s)
    late, early = s3 - s2, s2 - s1
    return late >= 0.5 * early and late > 1e-6 * (1.0 + abs(s3))


def _search(datas: Sequence[_WindowData], strong: bool, eta: Optional[float],
            mu: Optional[float], eta_grid, mu_grid) -> Dict[str, Any]:
    """Explicit witness check or (eta, mu) grid search over all sequences."""
    def profile(e):
        sups, worst, grow = None, None, False
        for i, d in enumerate(datas):
            marks = [d.horizon / 4, d.horizon / 2, d.horizon]
            s, win = window_sup(d, e, strong, marks)
            grow = grow or _growing(s)
            if sups is None or s[-1] > sups[-1]:
                sups, worst = s, dict(win, sequence=i)
        return sups, worst, grow

    if eta is not None:
        if mu is None:
            raise ValueError("explicit eta needs an explicit mu")
        s, win, grow = profile(eta)
        ok = s[-1] <= mu + MARGIN_TOL
        return {"ok": ok, "eta": eta, "mu": mu, "sup": float(s[-1]), "window": win,
                "growing": grow, "explicit": True}
    best = None
    first = None
    for e in sorted(eta_grid):
        s, win, grow = profile(e)
        if first is None:
            first = {"eta": e, "sup": float(s[-1]), "window": win, "growing": grow,
                     "trend": [float(v) for v in s]}
        if grow:
            continue
        above = [m for m in mu_grid if m > s[-1] + MARGIN_TOL]
        if not above:
            continue
        best = {"ok": True, "eta": float(e), "mu": float(min(above)), "sup": float(s[-1]), "window": win,
                "growing": False, "explicit": False}
    if best is None:
        return dict(first, ok=False, explicit=False, mu=None)
    return best


def _grids(eta_grid, mu_grid) -> Dict[str, Any]:
    return {"eta": [float(v) for v in eta_grid], "mu": [float(v) for v in mu_grid]}


# ------------------------------------------------------------------ thm 2


def _to_z(node: Expr) -> Expr:
    return exprdsl.substitute(node, {"r": exprdsl.Var("z")})


def check_thm2(hyp: LyapunovHypothesis, gammas: Sequence[ImpulseSeq], horizon: float = 10.0,
               z0s: Sequence[float] = (0.5, 1.0, 2.0), t0s: Sequence[float] = (0.0, 1.0),
               h0: float = 1e-3, uib_window: float = 1.0) -> Certificate:
    """Identity jumps: the stability of w' = -phi(t, w) carries over.

    Weak verdict from an envelope fit on solutions of the flow equation along
    each sequence; the strong verdict is added only when every sequence looks
    uniformly incrementally bounded, via the time-shift construction.
    """
    rate = hyp.rates.get(None, next(iter(hyp.rates.values())))
    gain = hyp.gain_fn(None)
    for t in (0.0, 1.0, 3.7):
        for r in (0.0, 0.3, 1.0, 7.0):
            if abs(gain(t, r, 1.0) - r) > 1e-12:
                raise ParameterMismatch("jump gain is not the identity")
    rate_z = _to_z(_parse(rate, RATE_VARS))
    jump_z = exprdsl.Var("z")
    ensemble = []
    opts = SolverOptions(h0=h0)
    for g in gammas:
        cs = ComparisonSystem(rate_z, jump_z, gamma=g)
        t_end = min(g.horizon, horizon)
        for t0 in t0s:
            if t0 >= t_end:
                continue
            for z0 in z0s:
                ensemble.append((solve_equation(cs, t0, z0, t_end, opts), g))
    fit = fit_envelope(ensemble, "weak")
    grids = {"z0": list(z0s), "t0": list(t0s), "h0": h0}
    notes = ["empirical: evidence is limited to the simulated horizon and samples"]
    if fit.verdict == "diverges":
        return Certificate("thm2", "fails", horizon=horizon, grids=grids,
                           conclusions={"weak": "fails"}, failure=fit.witness,
                           reason="flow solutions grow", notes=notes)
    if fit.verdict != "fits":
        return Certificate("thm2", "inconclusive", horizon=horizon, grids=grids,
                           reason="no exponential envelope fits with margin", notes=notes)
    beta = fit.envelope.beta
    witnesses = {"eta": beta.rate}
    conclusions = {"weak": "holds"}
    evidence = [uib_evidence(g, uib_window) for g in gammas]
    if all(ev["bounded"] for ev in evidence):
        deltas = np.linspace(0.0, horizon, 41)
        counts = uib_profile(gammas, deltas)
        phi = uib_majorant(deltas, counts)
        beta_hat, trace = kl_time_shift(beta, phi)
        rep = guas_check(ensemble, GuasEnvelope(beta_hat, "strong"))
        conclusions["strong"] = "holds" if rep.passed else "inconclusive"
        witnesses["N0"] = trace.n0
        notes.append("strong: horizon-limited profile of window counts")
    else:
        conclusions["strong"] = "inconclusive"
        notes.append("strong: window counts keep increasing (not uniformly incrementally bounded)")
    grids["uib_counts"] = [ev["counts"] for ev in evidence]
    return Certificate("thm2", "holds", witnesses, {"fit_rate": beta.rate}, horizon, grids,
                       conclusions, notes=notes)


# ------------------------------------------------------------------ thm 3


def _rate_callable(phi) -> Tuple[Optional[float], Callable[[float], float]]:
    """(constant value or None, callable of t)."""
    if isinstance(phi, (int, float)):
        v = float(phi)
        return v, lambda t: v
    node = _parse(phi, ["t"])
    if "t" not in exprdsl.free_vars(node):
        v = exprdsl.evaluate(node, {})
        return v, lambda t: v
    fn = exprdsl.compile_expr(node, ["t"])
    return None, fn


def _cumulative_integral(fn, xs: np.ndarray) -> np.ndarray:
    out = np.zeros(xs.size)
    uniq = np.unique(xs)
    acc, prev, vals = 0.0, 0.0, {}
    for x in uniq:
        if x > prev:
            acc += adaptive_simpson(fn, prev, float(x), 1e-10)
        vals[float(x)] = acc
        prev = float(x)
    for i, x in enumerate(xs):
        out[i] = vals[float(x)]
    return out


def _estimate_kappa_c(fn, span: float = 20.0, min_window: float = 5.0) -> Tuple[float, float]:
    ts = np.linspace(0.0, span, 401)
    cum = _cumulative_integral(fn, ts)
    L = ts[None, :] - ts[:, None]
    I = cum[None, :] - cum[:, None]
    long = L >= min_window
    c = float(np.min(I[long] / L[long]))
    mask = L >= 0
    kappa = float(np.exp(np.max(-I[mask] + c * L[mask])))
    return max(kappa, 1.0), c


def _log_gain(d: float) -> float:
    if d < 0:
        raise ParameterMismatch("jump gain d must be nonnegative")
    return -math.inf if d == 0 else math.log(d)


def check_thm3(phi, d: float, gammas: Sequence[ImpulseSeq], mode: str = "weak",
               kappa: Optional[float] = None, c: Optional[float] = None,
               eta: Optional[float] = None, mu: Optional[float] = None,
               eta_grid=ETA_GRID, mu_grid=MU_GRID, t_grid_step: Optional[float] = None) -> Certificate:
    """Linear rate phi(t) r and linear jumps d r under a window condition.

    ``phi`` is a number or an expression in t.  With explicit ``eta`` and
    ``mu`` the condition is checked for those witnesses; otherwise a grid
    search picks the fastest decay that keeps the window supremum bounded.
    """
    if mode not in ("weak", "strong"):
        raise ValueError("mode is weak or strong")
    const, fn = _rate_callable(phi)
    notes = []
    if c is None or kappa is None:
        if const is not None:
            c_est, k_est = const, 1.0
        else:
            k_est, c_est = _estimate_kappa_c(fn)
            notes.append("empirical kappa, c")
        c = c_est if c is None else c
        kappa = k_est if kappa is None else kappa
    if not kappa > 0:
        raise ParameterMismatch("kappa must be positive")
    lg = _log_gain(d)
    strong = mode == "strong"
    horizon = max(g.horizon for g in gammas)

    def build(use_integral: bool):
        datas = []
        for g in gammas:
            extra = ()
            if use_integral and const is None:
                step = t_grid_step or g.horizon / 2000.0
                extra = tuple(np.arange(step, g.horizon, step))
            x, n = _candidates(g.array, g.horizon, extra)
            psi = c * x if not use_integral else (
                const * x if const is not None else _cumulative_integral(fn, x))
            w0, bl = _cum_weights([lg] * len(g))
            datas.append(_WindowData(x, n, psi, w0, bl, g.horizon))
        return datas

    res = _search(build(False), strong, eta, mu, eta_grid, mu_grid)
    conclusions = {}
    witnesses = {"kappa": float(kappa), "c": float(c), "d": float(d)}
    grids = _grids(eta_grid, mu_grid) if eta is None else {}
    if isinstance(phi, (str,)) or isinstance(phi, (exprdsl.Const, exprdsl.Var, exprdsl.Unary,
                                                   exprdsl.Binary, exprdsl.IfLe)):
        alt = _search(build(True), False, eta if not strong else None,
                      mu if not strong else None, eta_grid, mu_grid)
        conclusions["integral_weak"] = "holds" if alt["ok"] else "fails"
        if alt["ok"]:
            witnesses["integral_eta"], witnesses["integral_mu"] = alt["eta"], alt["mu"]
    if res["ok"]:
        witnesses["eta"], witnesses["mu"] = res["eta"], res["mu"]
        conclusions[mode] = "holds"
        return Certificate("thm3", "holds", witnesses, {"mu_minus_sup": res["mu"] - res["sup"]},
                           horizon, grids, conclusions, notes=notes)
    conclusions[mode] = "fails"
    failure = {"eta": res["eta"], "sup": res["sup"], "window": res["window"],
               "growing": res["growing"]}
    if "trend" in res:
        failure["trend"] = res["trend"]
    return Certificate("thm3", "fails", witnesses, {}, horizon, grids, conclusions,
                       reason="window condition violated", failure=failure, notes=notes)


# ---------------------------------------------------------------- cor 1


def cor1_witnesses(c: float, d: float, n0: float, tau_d: float, case: str) -> Dict[str, float]:
    """Explicit (eta, mu) pairs for the weak and strong window conditions."""
    if case == "adt":
        if d > 1:
            eta_w, mu_w = c - math.log(d) / tau_d, n0 * math.log(d)
        else:
            eta_w = c / 2.0
            mu_w = eta_w
        if d == 0:
            eta_s = min(c / 2.0, c * tau_d / (tau_d + 1.0))
            mu_s = eta_s
        else:
            ld = math.log(d)
            eta_s = min(c / 2.0, c * tau_d / (tau_d + 1.0), (c * tau_d - ld) / (tau_d + 1.0))
            mu_s = n0 * max(ld + eta_s, 0.0)
            if mu_s == 0.0:
                mu_s = eta_s
        return {"eta": eta_w, "mu": mu_w, "eta_strong": eta_s, "mu_strong": mu_s}
    tau_bar = max(tau_d, 1.0)
    if d == 0:
        eta = 1.0 / (2.0 * tau_bar)
        mu = (abs(c) + eta) * tau_d * n0 + eta
        return {"eta": eta, "mu": mu, "eta_strong": eta, "mu_strong": mu, "d_hat": math.inf}
    d_hat = abs(math.log(d)) - abs(c) * tau_d
    eta = d_hat / (2.0 * tau_bar)
    mu = abs(c) * tau_d * n0 + d_hat * n0 / 2.0
    return {"eta": eta, "mu": mu, "eta_strong": eta, "mu_strong": mu, "d_hat": d_hat}


def check_cor1(c: float, d: float, class_spec: DwellClassSpec) -> Certificate:
    """Closed-form dwell-time thresholds for the linear setting."""
    kind = class_spec.kind
    n0, tau = float(class_spec.n0), float(class_spec.tau_d)
    if kind not in ("adt", "radt"):
        raise ParameterMismatch("class must be adt or radt")
    if d < 0 or not tau > 0:
        raise ParameterMismatch("need d >= 0 and tau_d > 0")
    if kind == "adt":
        if not c > 0:
            raise ParameterMismatch("average dwell-time case needs c > 0")
        threshold = 0.0 if d == 0 else max(math.log(d) / c, 0.0)
        ok = tau > threshold
        margin = tau - threshold
    else:
        if not (c <= 0 and d < 1):
            raise ParameterMismatch("reverse average dwell-time case needs c <= 0 and d < 1")
        threshold = math.inf if c * d == 0 else abs(math.log(d) / c)
        ok = tau < threshold
        margin = threshold - tau
    witnesses = {"c": c, "d": d, "N0": n0, "tau_d": tau, "threshold": threshold}
    if not ok:
        return Certificate("cor1", "fails", witnesses, {}, None, {},
                           {"weak": "fails", "strong": "fails"},
                           reason="dwell-time threshold not met",
                           failure={"tau_d": tau, "threshold": threshold})
    witnesses.update(cor1_witnesses(c, d, n0, tau, kind))
    margins = {"threshold_gap": margin if math.isfinite(margin) else 1.0,
               "eta": witnesses["eta"], "eta_strong": witnesses["eta_strong"]}
    return Certificate("cor1", "holds", witnesses, margins, None, {},
                       {"weak": "holds", "strong": "holds"})


# ------------------------------------------------------------------ thm 4


def _scalar_fn(f):
    if isinstance(f, str):
        return PosDefFn.from_text(f)
    if isinstance(f, (exprdsl.Const, exprdsl.Var, exprdsl.Unary, exprdsl.Binary, exprdsl.IfLe)):
        return PosDefFn(f)
    return f


def _sign_check(phi_bar, sign: int, grid) -> None:
    for r in grid:
        v = phi_bar(float(r))
        if not sign * v > 0:
            want = "positive" if sign > 0 else "negative"
            raise SignMismatch(f"rate factor must be {want} definite; value {v!r} at r={r!r}")


def _dwell_member(times: Sequence[float], horizon: float, theta: float, mode: str) -> bool:
    edges = [0.0] + list(times)
    gaps = np.diff(edges) if len(edges) > 1 else np.zeros(0)
    if mode == "min_dwell":
        return bool(np.all(gaps[1:] >= theta - 1e-12)) if gaps.size > 1 else True
    tail = horizon - edges[-1]
    return bool(np.all(gaps <= theta + 1e-12)) and tail <= theta + 1e-12


def check_thm4(alpha_bar, phi_bar, rate_p, theta: float, mode: str,
               gammas: Sequence[ImpulseSeq] = (), a_grid=None, t_grid=None) -> Certificate:
    """Separable rate p(t) phi_bar(r) and jump bound alpha_bar(r) under a
    minimum (``min_dwell``) or maximum (``max_dwell``) dwell time ``theta``."""
    alpha_bar, phi_bar = _scalar_fn(alpha_bar), _scalar_fn(phi_bar)
    if isinstance(rate_p, str):
        rate_p = exprdsl.parse(rate_p, ["t"])
    sign_grid = np.logspace(-4, 4, 33)
    if mode == "min_dwell":
        _sign_check(phi_bar, +1, sign_grid)
        denom = phi_bar
    elif mode == "max_dwell":
        _sign_check(phi_bar, -1, sign_grid)
        denom = Composite(phi_bar, MonotonePW.identity(), -1.0)
    else:
        raise ValueError("mode is min_dwell or max_dwell")
    grids = {"theta": theta}
    witnesses = {"theta": theta}
    try:
        env = kinf_envelope(alpha_bar, denom, rate_p, theta, mode, a_grid, t_grid)
    except DivergenceUnverified as exc:
        return Certificate("thm4", "inconclusive", witnesses, {}, None, grids,
                           {"strong": "inconclusive"}, reason=str(exc),
                           failure={"value": exc.value, "cutoff": exc.cutoff})
    except ConditionViolated as exc:
        return Certificate("thm4", "fails", witnesses, {}, None, grids, {"strong": "fails"},
                           reason=str(exc), failure=exc.witness)
    key_n, key_m = ("sup_jump_integral", "M") if mode == "min_dwell" else ("N_star", "M_star")
    witnesses[key_n], witnesses[key_m] = env.jump_integral, env.flow_integral
    notes = []
    outside = [i for i, g in enumerate(gammas) if not _dwell_member(g.times, g.horizon, theta, mode)]
    if outside:
        return Certificate("thm4", "inconclusive", witnesses, {}, None, grids,
                           {"strong": "inconclusive"},
                           reason="sequences outside the dwell-time class",
                           failure={"sequences": outside})
    return Certificate("thm4", "holds", witnesses, {"integral_gap": env.margin}, None, grids,
                       {"strong": "holds"}, notes=notes)


# ------------------------------------------------------------------ thm 5


def _psi_switched(sigma: SwitchSeq, rates: Mapping[str, float], flow_classes, xs: np.ndarray) -> np.ndarray:
    ts = sigma.gamma.array
    edges = np.r_[0.0, ts]
    seg_rate = np.array([rates[flow_classes[m]] for m in sigma.flow_modes], float)
    base = np.r_[0.0, np.cumsum(seg_rate[:-1] * np.diff(edges))] if ts.size else np.zeros(1)
    seg = np.searchsorted(ts, xs, "right")
    return base[seg] + seg_rate[seg] * (xs - edges[seg])


def check_thm5(sigmas: Sequence[SwitchSeq], flow_classes: Mapping[int, str],
               jump_classes: Mapping[Tuple[int, int, int], str], c_s: float, c_u: float,
               d_s: float, d_u: float, mode: str = "weak", eta: Optional[float] = None,
               mu: Optional[float] = None, eta_grid=ETA_GRID, mu_grid=MU_GRID) -> Certificate:
    """Exponential flow and jump classes with activation-time accounting."""
    if not (c_s > 0 and c_u > 0 and 0 <= d_s < 1 < d_u):
        raise ParameterMismatch("need c_s, c_u > 0 and 0 <= d_s < 1 < d_u")
    for sg in sigmas:
        for m in set(sg.flow_modes):
            if m not in flow_classes:
                raise PartitionIncomplete(f"flow mode {m} has no class")
        for k in range(1, len(sg.gamma) + 1):
            if sg.triple(k) not in jump_classes:
                raise PartitionIncomplete(f"jump triple {sg.triple(k)} has no class")
    rates = {"s": c_s, "n": 0.0, "u": -c_u}
    lg = {"s": _log_gain(d_s), "n": 0.0, "u": math.log(d_u)}
    datas = []
    for sg in sigmas:
        x, n = _candidates(sg.gamma.array, sg.gamma.horizon)
        psi = _psi_switched(sg, rates, flow_classes, x)
        w0, bl = _cum_weights([lg[jump_classes[sg.triple(k)]] for k in range(1, len(sg.gamma) + 1)])
        datas.append(_WindowData(x, n, psi, w0, bl, sg.gamma.horizon))
    res = _search(datas, mode == "strong", eta, mu, eta_grid, mu_grid)
    fractions = []
    for sg in sigmas:
        st = activation_stats(sg, flow_classes, jump_classes, 0.0, sg.gamma.horizon)
        fractions.append(st.time["s"] / sg.gamma.horizon)
    witnesses = {"c_s": c_s, "c_u": c_u, "d_s": d_s, "d_u": d_u,
                 "p_s_min": float(min(fractions)) if fractions else 0.0}
    horizon = max(sg.gamma.horizon for sg in sigmas)
    grids = _grids(eta_grid, mu_grid) if eta is None else {}
    if res["ok"]:
        witnesses["eta"], witnesses["mu"] = res["eta"], res["mu"]
        return Certificate("thm5", "holds", witnesses, {"mu_minus_sup": res["mu"] - res["sup"]},
                           horizon, grids, {mode: "holds"})
    failure = {"eta": res["eta"], "sup": res["sup"], "window": res["window"],
               "growing": res["growing"]}
    return Certificate("thm5", "fails", witnesses, {}, horizon, grids, {mode: "fails"},
                       reason="window condition violated", failure=failure)


# ------------------------------------------------------------------ thm 6


@dataclass(frozen=True, eq=False)
class ContractionMap:
    """G(z) = max over modes of F_i^-1(F_i(alpha_bar(z)) + M_i)."""

    alpha_bar: Callable[[float], float]
    transforms: Tuple[Any, ...]
    levels: Tuple[float, ...]

    def __call__(self, z: float) -> float:
        if z <= 0.0:
            return 0.0
        a = self.alpha_bar(z)
        if a <= 0.0:
            return 0.0
        return max(F.inverse(F(a) + m) for F, m in zip(self.transforms, self.levels))


def contraction_map(alpha_bar, neg_rates: Sequence[Callable[[float], float]],
                    levels: Sequence[float]) -> ContractionMap:
    return ContractionMap(_scalar_fn(alpha_bar), tuple(f_transform(f) for f in neg_rates),
                          tuple(float(m) for m in levels))


@dataclass
class DiffIncResult:
    verdict: str                    # decays | stalls
    iterates: List[float]
    contraction: Optional[float] = None
    witness: Optional[Dict[str, float]] = None


def diffinc_oracle(G: Callable[[float], float], zeta0: float, steps: int = 200,
                   gap_grid: Optional[Sequence[float]] = None) -> DiffIncResult:
    """Iterate the largest selection z_{k+1} = G(z_k) of z_{k+1} in [0, G(z_k)]."""
    if zeta0 < 0:
        raise ValueError("zeta0 must be nonnegative")
    zs = [float(zeta0)]
    if zeta0 == 0.0:
        return DiffIncResult("decays", zs, 0.0)
    for k in range(steps):
        nxt = float(G(zs[-1]))
        if not nxt < zs[-1]:
            return DiffIncResult("stalls", zs + [nxt], None,
                                 {"k": k, "zeta_k": zs[-1], "zeta_next": nxt})
        zs.append(nxt)
        if nxt <= 1e-9 * zeta0:
            break
    ratios = [b / a for a, b in zip(zs, zs[1:]) if a > 0]
    contraction = ratios[0] if ratios else None
    if zs[-1] > 1e-9 * zeta0:
        grid = gap_grid if gap_grid is not None else np.geomspace(zs[-1], zeta0, 64)
        for z in grid:
            if not z - G(float(z)) > 0:
                return DiffIncResult("stalls", zs, contraction, {"zeta": float(z), "G": float(G(z))})
    return DiffIncResult("decays", zs, contraction)


def check_thm6(modes: Mapping[int, Tuple[Any, Any]], alpha_bar, thetas: Mapping[int, float],
               mode: str, sigmas: Sequence[SwitchSeq] = (), a_grid=None, t_grid=None,
               zeta_grid: Sequence[float] = tuple(np.logspace(-6, 6, 121))) -> Certificate:
    """Per-mode integral conditions for switched systems with a shared jump bound.

    ``modes`` maps a flow mode to (p_i, phi_bar_i).
    """
    if not modes:
        raise ValueError("need at least one flow mode")
    alpha_bar = _scalar_fn(alpha_bar)
    for sg in sigmas:
        for m in set(sg.flow_modes):
            if m not in modes or m not in thetas:
                raise PartitionIncomplete(f"flow mode {m} has no data")
    sign_grid = np.logspace(-4, 4, 33)
    witnesses: Dict[str, float] = {}
    margins: Dict[str, float] = {}
    neg_rates, levels = [], []
    for i in sorted(modes):
        p_i, phi_i = modes[i]
        phi_i = _scalar_fn(phi_i)
        if isinstance(p_i, str):
            p_i = exprdsl.parse(p_i, ["t"])
        theta = float(thetas[i])
        if mode == "min_dwell":
            _sign_check(phi_i, +1, sign_grid)
            denom = phi_i
        elif mode == "max_dwell":
            _sign_check(phi_i, -1, sign_grid)
            denom = Composite(phi_i, MonotonePW.identity(), -1.0)
        else:
            raise ValueError("mode is min_dwell or max_dwell")
        try:
            env = kinf_envelope(alpha_bar, denom, p_i, theta, mode, a_grid, t_grid)
        except DivergenceUnverified as exc:
            return Certificate("thm6", "inconclusive", witnesses, {}, None, {},
                               {"strong": "inconclusive"}, reason=f"mode {i}: {exc}")
        except ConditionViolated as exc:
            return Certificate("thm6", "fails", witnesses, {}, None, {}, {"strong": "fails"},
                               reason=f"mode {i}: {exc}", failure=dict(exc.witness, mode=i))
        tag = "N_star" if mode == "max_dwell" else "sup_jump_integral"
        witnesses[f"{tag}_{i}"] = env.jump_integral
        witnesses[f"{'M_star' if mode == 'max_dwell' else 'M'}_{i}"] = env.flow_integral
        witnesses[f"theta_{i}"] = theta
        margins[f"integral_gap_{i}"] = env.margin
        neg_rates.append(denom)
        levels.append(env.flow_integral)
    for idx, sg in enumerate(sigmas):
        for i in sorted(modes):
            edges = np.r_[0.0, sg.gamma.array, sg.gamma.horizon]
            lengths = np.diff(edges)
            mine = [L for L, m in zip(lengths, sg.flow_modes) if m == i]
            bad = (any(L > thetas[i] + 1e-12 for L in mine) if mode == "max_dwell"
                   else any(L < thetas[i] - 1e-12 for L in mine[1:-1]))
            if bad:
                return Certificate("thm6", "inconclusive", witnesses, {}, None, {},
                                   {"strong": "inconclusive"},
                                   reason="switching sequence outside the dwell-time class",
                                   failure={"sequence": idx, "mode": i})
    notes = []
    if mode == "max_dwell":
        G = contraction_map(alpha_bar, neg_rates, levels)
        gaps = [(z - G(float(z))) / z for z in zeta_grid]
        margins["contraction_gap"] = float(min(gaps))
        if not min(gaps) > 0:
            return Certificate("thm6", "inconclusive", witnesses, {}, None,
                               {"zeta": list(zeta_grid)}, {"strong": "inconclusive"},
                               reason="constructed map does not contract on the grid")
        orc = diffinc_oracle(G, 1.0)
        if orc.verdict != "decays":
            return Certificate("thm6", "inconclusive", witnesses, {}, None, {},
                               {"strong": "inconclusive"}, reason="difference inclusion stalls",
                               failure=orc.witness)
        witnesses["contraction"] = orc.contraction
    else:
        notes.append("minimum dwell-time mode: per-mode integral comparison only")
    return Certificate("thm6", "holds", witnesses, margins, None,
                       {"zeta": [float(z) for z in zeta_grid]}, {"strong": "holds"}, notes=notes)


# -------------------------------------------------------- ISS envelopes


@dataclass(frozen=True, eq=False)
class IssGain:
    """rho(r) = phi1_inv(2 * beta(nu(r), 0)) with nu = max(pi, chi)."""

    beta: SontagKL
    nu: Callable[[float], float]
    phi1_inv: Callable[[float], float]

    def __call__(self, r):
        if np.ndim(r) == 0:
            r = float(r)
            if r <= 0.0:
                return 0.0
            return float(self.phi1_inv(2.0 * sontag_eval(self.beta, self.nu(r), 0.0)))
        return np.array([self(float(v)) for v in np.ravel(r)]).reshape(np.shape(r))


def lyapunov_iss_envelope(beta: SontagKL, phi1_inv, phi2, chi, pi) -> Tuple[SontagKL, IssGain]:
    """Turn a comparison bound into an ISS pair (beta_iss, rho) for the state
    measures: beta_iss(r, s) = phi1_inv(beta(phi2(r), s))."""
    beta_iss = SontagKL(Composite(phi1_inv, beta.alpha1), Composite(beta.alpha2, phi2),
                        beta.rate, beta.scale, beta.warp)
    return beta_iss, IssGain(beta, PointwiseMax(pi, chi), phi1_inv)


@dataclass
class IssCase:
    traj: Trajectory
    u: InputSignal
    gamma: Optional[ImpulseSeq]


@dataclass
class IssReport:
    passed: bool
    worst_margin: float
    witness: Optional[Dict[str, Any]] = None
    samples: int = 0


def iss_check(cases: Sequence[IssCase], h: MeasureFn, h0: MeasureFn, beta: SontagKL,
              rho: Callable[[float], float], mode: str = "weak", tol: float = 1e-9) -> IssReport:
    """h(t, x(t)) <= beta(h0(t0, x0), t - t0 [+ jumps]) + rho(input norm) at every
    sample, on both sides of every jump.  Margins are relative to max(1, bound)."""
    if not cases:
        raise ValueError("ensemble must be nonempty")
    if mode not in ("weak", "strong"):
        raise ValueError("mode is weak or strong")
    worst, wit, count = math.inf, None, 0
    for idx, case in enumerate(cases):
        traj = case.traj
        ts, xs, kinds = traj.points()
        s = ts - traj.t0
        if mode == "strong" and case.gamma is not None and len(case.gamma):
            a = case.gamma.array
            lo = np.searchsorted(a, traj.t0, "right")
            n = np.where(kinds == PRE_JUMP, np.searchsorted(a, ts, "left"),
                         np.searchsorted(a, ts, "right")) - lo
            s = s + np.maximum(n, 0)
        r0 = h0(traj.t0, traj.x0)
        with np.errstate(over="ignore"):
            decay = np.asarray(sontag_eval(beta, np.full(s.shape, r0), s), float)
        norms = gamma_norm_series(case.u, case.gamma, traj.t0, ts, kinds)
        levels, inv = np.unique(norms, return_inverse=True)
        gain = np.array([float(rho(float(v))) for v in levels])[inv].reshape(norms.shape)
        bound = decay + gain
        vals = np.array([h(t, x) for t, x in zip(ts, xs)])
        rel = (bound - vals) / np.maximum(1.0, np.abs(bound))
        count += ts.size
        j = int(np.argmin(rel))
        if rel[j] < worst:
            worst = float(rel[j])
            wit = {"case": idx, "t": float(ts[j]), "h": float(vals[j]), "bound": float(bound[j]),
                   "t0": traj.t0, "x0": list(traj.x0), "side": int(kinds[j])}
    return IssReport(worst >= -tol, worst, wit, count)


# ------------------------------------------------------------- falsify


@dataclass(frozen=True)
class FalsifyOptions:
    t0_max: float = 3.0
    duration: float = 2.0
    x0_log_range: Tuple[float, float] = (-2.0, 1.0)
    signed_x0: bool = True
    u_range: Tuple[float, float] = (0.0, 0.5)
    u_pieces: int = 3
    h0: float = 1e-3
    after_jump_prob: float = 0.5
    gamma_sampler: Optional[Callable[[np.random.Generator], ImpulseSeq]] = None


@dataclass
class FalsifyResult:
    verdict: str                    # no_counterexample | counterexample
    trials: int
    counterexample: Optional[Dict[str, Any]] = None


def falsify(sys, h: MeasureFn, h0: MeasureFn, beta: SontagKL, rho, mode: str = "weak",
            budget: int = 200, seed: int = 0, opts: FalsifyOptions = FalsifyOptions()) -> FalsifyResult:
    """Random search for an initial time, state, input and impulse sequence
    that breaks the ISS bound.  ``sys`` is a system or a callable drawing one
    from a generator (for families).  Deterministic for a fixed seed."""
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    rng = np.random.default_rng(seed)
    for trial in range(budget):
        s = sys(rng) if callable(sys) and not hasattr(sys, "flow_at") else sys
        if opts.gamma_sampler is not None:
            s = s.with_gamma(opts.gamma_sampler(rng))
        gamma = s.impulses
        t0 = float(rng.uniform(0.0, opts.t0_max))
        if len(gamma) and rng.uniform() < opts.after_jump_prob:
            ts = gamma.within(0.0, opts.t0_max)
            if ts.size:
                tau = float(ts[int(rng.integers(ts.size))])
                nxt = gamma.within(tau, tau + 10.0)
                gap = float(nxt[0] - tau) if nxt.size else 1.0
                t0 = tau + float(rng.uniform(0.0, 0.1)) * gap
        t_end = min(t0 + opts.duration, gamma.horizon)
        if t_end <= t0:
            continue
        mag = 10.0 ** rng.uniform(*opts.x0_log_range, size=s.n)
        sign = rng.choice([-1.0, 1.0], size=s.n) if opts.signed_x0 else np.ones(s.n)
        x0 = tuple(float(v) for v in mag * sign)
        starts = np.sort(rng.uniform(t0, t_end, size=max(opts.u_pieces - 1, 0)))
        starts = (t0,) + tuple(float(v) for v in starts)
        vals = tuple(tuple(float(v) for v in rng.uniform(*opts.u_range, size=s.m)) for _ in starts)
        u = InputSignal(tuple(sorted(set(starts))), vals[:len(set(starts))], {}, s.m)
        traj = simulate(s, t0, x0, u, t_end, SolverOptions(h0=opts.h0))
        rep = iss_check([IssCase(traj, u, gamma)], h, h0, beta, rho, mode)
        if not rep.passed:
            return FalsifyResult("counterexample", trial + 1, {
                "t0": t0, "x0": list(x0), "u": u.to_dict(),
                "gamma_head": [float(v) for v in gamma.within(t0, t_end)[:20]],
                "t": rep.witness["t"], "h": rep.witness["h"], "bound": rep.witness["bound"]})
    return FalsifyResult("no_counterexample", budget)
