"""Comparison-function toolkit: piecewise-linear class-K style functions,
expression-defined scalar functions, KL bounds in exponential form, and the
constructions that reshape them (time-shift of a KL bound by a jump
counting profile, K-infinity envelopes of positive-definite jump maps).

Every routine returns both the object it builds and, where a construction has
intermediate pieces, a trace of those pieces so tests can check each step.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from . import exprdsl
from .exprdsl import Expr

__all__ = [
    "InvalidFunction", "NotInvertible", "ConditionViolated", "DivergenceUnverified",
    "MonotonePW", "PosDefFn", "SontagKL", "ConstructionTrace", "Transform",
    "EnvelopeResult", "adaptive_simpson", "monotone_inverse", "sontag_eval",
    "kl_time_shift", "f_transform", "check_divergence", "window_integral_bounds",
    "kinf_envelope", "DEFAULT_A_GRID", "Composite", "PointwiseMax",
]

ScalarFn = Callable[[float], float]

DEFAULT_A_GRID = np.logspace(-6.0, 6.0, 400)
DIVERGENCE_CUTOFF = 1e100
DIVERGENCE_THRESHOLD = 50.0


class InvalidFunction(ValueError):
    pass


class NotInvertible(ValueError):
    pass


class ConditionViolated(Exception):
    def __init__(self, message: str, witness: Dict[str, Any]):
        super().__init__(message)
        self.witness = witness


class DivergenceUnverified(Exception):
    def __init__(self, message: str, value: float, cutoff: float):
        super().__init__(message)
        self.value = value
        self.cutoff = cutoff


# ---------------------------------------------------------------- quadrature


def adaptive_simpson(f: ScalarFn, a: float, b: float, tol: float = 1e-10,
                     max_depth: int = 48) -> float:
    """Adaptive Simpson rule with Richardson correction.

    ``tol`` is applied relative to ``max(1, |estimate|)`` on each panel.
    """
    if a == b:
        return 0.0
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    scale = max(1.0, abs(whole))
    return _asr(f, a, b, fa, fm, fb, whole, tol * scale, max_depth)


def _asr(f, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    delta = left + right - whole
    if depth <= 0 or abs(delta) <= 15.0 * tol or not math.isfinite(delta):
        return left + right + delta / 15.0
    return (_asr(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + _asr(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1))


# ------------------------------------------------------------- MonotonePW


@dataclass(frozen=True, eq=False)
class MonotonePW:
    """Nondecreasing piecewise-linear function on [xs[0], inf).

    Left of the first breakpoint the function is constant; right of the last
    it continues linearly with ``tail_slope`` (``inf`` means the value jumps
    to ``inf`` past the last breakpoint, used for inverses of bounded maps).
    """

    breakpoints: Tuple[float, ...]
    values: Tuple[float, ...]
    tail_slope: float
    zero_at_zero: bool = False
    strict: bool = False
    unbounded: bool = False
    _slopes: Tuple[float, ...] = field(default=(), repr=False)

    def __post_init__(self):
        xs, ys = tuple(map(float, self.breakpoints)), tuple(map(float, self.values))
        object.__setattr__(self, "breakpoints", xs)
        object.__setattr__(self, "values", ys)
        if len(xs) == 0 or len(xs) != len(ys):
            raise InvalidFunction("breakpoints and values must be non-empty and equal length")
        if not all(math.isfinite(v) for v in xs + ys):
            raise InvalidFunction("breakpoints and values must be finite")
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise InvalidFunction("breakpoints must be strictly increasing")
        if any(b < a for a, b in zip(ys, ys[1:])):
            raise InvalidFunction("values must be nondecreasing")
        if not (self.tail_slope >= 0.0):
            raise InvalidFunction("tail slope must be >= 0")
        if self.zero_at_zero and (xs[0] != 0.0 or ys[0] != 0.0):
            raise InvalidFunction("zero_at_zero requires the point (0, 0)")
        if self.zero_at_zero and ys[0] < 0.0:
            raise InvalidFunction("values must be >= 0")
        if self.strict and (any(b <= a for a, b in zip(ys, ys[1:])) or self.tail_slope <= 0.0):
            raise InvalidFunction("strict requires strictly increasing values and a positive tail")
        if self.unbounded and self.tail_slope <= 0.0:
            raise InvalidFunction("unbounded requires a positive tail slope")
        slopes = tuple((y1 - y0) / (x1 - x0) for x0, x1, y0, y1 in zip(xs, xs[1:], ys, ys[1:]))
        object.__setattr__(self, "_slopes", slopes)

    # constructors ------------------------------------------------------
    @classmethod
    def from_points(cls, xs: Sequence[float], ys: Sequence[float],
                    tail_slope: Optional[float] = None) -> "MonotonePW":
        xs, ys = [float(v) for v in xs], [float(v) for v in ys]
        if tail_slope is None:
            tail_slope = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2]) if len(xs) > 1 else 0.0
        strict = tail_slope > 0 and all(b > a for a, b in zip(ys, ys[1:]))
        return cls(tuple(xs), tuple(ys), float(tail_slope),
                   zero_at_zero=(xs[0] == 0.0 and ys[0] == 0.0),
                   strict=strict, unbounded=tail_slope > 0)

    @classmethod
    def from_callable(cls, fn: ScalarFn, xs: Sequence[float],
                      tail_slope: Optional[float] = None) -> "MonotonePW":
        return cls.from_points(xs, [fn(float(x)) for x in xs], tail_slope)

    @classmethod
    def linear(cls, slope: float = 1.0) -> "MonotonePW":
        return cls((0.0, 1.0), (0.0, float(slope)), float(slope), True, slope > 0, slope > 0)

    @classmethod
    def identity(cls) -> "MonotonePW":
        return cls.linear(1.0)

    # evaluation --------------------------------------------------------
    @property
    def is_kinf(self) -> bool:
        return self.zero_at_zero and self.strict and self.unbounded

    def _eval1(self, x: float) -> float:
        xs, ys = self.breakpoints, self.values
        if x <= xs[0]:
            return ys[0]
        if x >= xs[-1]:
            if x == xs[-1]:
                return ys[-1]
            if math.isinf(self.tail_slope):
                return math.inf
            return ys[-1] + self.tail_slope * (x - xs[-1])
        i = bisect.bisect_right(xs, x) - 1
        return ys[i] + self._slopes[i] * (x - xs[i])

    def __call__(self, x):
        if np.ndim(x) == 0:
            return self._eval1(float(x))
        arr = np.asarray(x, dtype=float)
        xs = np.asarray(self.breakpoints)
        ys = np.asarray(self.values)
        i = np.clip(np.searchsorted(xs, arr, "right") - 1, 0, max(len(xs) - 2, 0))
        if len(xs) > 1:
            sl = np.asarray(self._slopes)
            out = ys[i] + sl[i] * (arr - xs[i])
        else:
            out = np.full(arr.shape, ys[0])
        out = np.where(arr <= xs[0], ys[0], out)
        with np.errstate(invalid="ignore"):
            tail = ys[-1] + self.tail_slope * (arr - xs[-1])
        tail = np.where(arr == xs[-1], ys[-1], tail)
        return np.where(arr >= xs[-1], tail, out)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": "pwlinear", "breakpoints": list(self.breakpoints),
                "values": list(self.values), "tail_slope": self.tail_slope}


def monotone_inverse(f: MonotonePW) -> MonotonePW:
    """Exact inverse of a strictly increasing piecewise-linear map."""
    if not f.strict:
        raise NotInvertible("function is not strictly increasing")
    if math.isinf(f.tail_slope):
        return MonotonePW(f.values, f.breakpoints, 0.0, zero_at_zero=f.zero_at_zero)
    return MonotonePW(f.values, f.breakpoints, 1.0 / f.tail_slope,
                      zero_at_zero=f.zero_at_zero, strict=True, unbounded=True)


# --------------------------------------------------------------- PosDefFn


@dataclass(frozen=True, eq=False)
class PosDefFn:
    """Scalar function given by an expression in one variable."""

    body: Expr
    var: str = "r"
    domain_max: float = math.inf
    sample_grid: Tuple[float, ...] = field(default=tuple(DEFAULT_A_GRID), repr=False)
    _fn: Callable = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_fn", exprdsl.compile_expr(self.body, [self.var]))

    @classmethod
    def from_text(cls, text: str, var: str = "r", **kw) -> "PosDefFn":
        return cls(exprdsl.parse(text, [var]), var=var, **kw)

    def __call__(self, r):
        if np.ndim(r) == 0:
            return self._fn(float(r))
        return np.array([self._fn(float(v)) for v in np.ravel(r)]).reshape(np.shape(r))

    def text(self) -> str:
        return exprdsl.to_text(self.body)

    def check_positive_definite(self) -> None:
        """Raise ``InvalidFunction`` unless f(0)=0 and f>0 on the sample grid."""
        try:
            z = self._fn(0.0)
        except exprdsl.DomainError:
            z = 0.0
        if z != 0.0:
            raise InvalidFunction(f"f(0) = {z!r}, expected 0")
        for r in self.sample_grid:
            if r > self.domain_max:
                break
            v = self._fn(float(r))
            if not v > 0.0:
                raise InvalidFunction(f"f({r!r}) = {v!r} is not positive")

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": "expr", "var": self.var, "body": self.text()}


# ---------------------------------------------------------------- SontagKL


@dataclass(frozen=True, eq=False)
class SontagKL:
    """beta(r, s) = alpha1(scale * alpha2(r) * exp(-rate * warp(s))).

    ``warp`` defaults to the identity.
    """

    alpha1: ScalarFn
    alpha2: ScalarFn
    rate: float
    scale: float = 1.0
    warp: Optional[MonotonePW] = None

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise InvalidFunction("rate must be positive and finite")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise InvalidFunction("scale must be positive and finite")

    def __call__(self, r, s):
        return sontag_eval(self, r, s)

    def to_dict(self) -> Dict[str, Any]:
        def enc(f):
            return f.to_dict() if hasattr(f, "to_dict") else {"kind": "callable", "repr": repr(f)}
        return {"alpha1": enc(self.alpha1), "alpha2": enc(self.alpha2), "rate": self.rate,
                "scale": self.scale, "warp": None if self.warp is None else self.warp.to_dict()}


def sontag_eval(beta: SontagKL, r, s):
    if np.ndim(r) == 0 and np.ndim(s) == 0:
        w = float(s) if beta.warp is None else beta.warp(float(s))
        inner = beta.scale * beta.alpha2(float(r)) * math.exp(-beta.rate * w)
        return beta.alpha1(inner)
    rr, ss = np.broadcast_arrays(np.asarray(r, float), np.asarray(s, float))
    w = ss if beta.warp is None else beta.warp(ss)
    inner = beta.scale * _apply(beta.alpha2, rr) * np.exp(-beta.rate * w)
    return _apply(beta.alpha1, inner)


def _apply(fn, arr: np.ndarray) -> np.ndarray:
    if isinstance(fn, (MonotonePW, Composite, PointwiseMax)):
        return np.asarray(fn(arr), float)
    flat = [fn(float(v)) for v in np.ravel(arr)]
    return np.asarray(flat, float).reshape(arr.shape)


# ---------------------------------------------------------- KL time shift


@dataclass(frozen=True, eq=False)
class ConstructionTrace:
    n0: float
    a: float
    psi: MonotonePW
    rho: MonotonePW
    sigma_hat: MonotonePW
    sigma: MonotonePW


def _with_origin(phi: MonotonePW) -> Tuple[list, list]:
    xs, ys = list(phi.breakpoints), list(phi.values)
    if xs[0] > 0.0:
        xs.insert(0, 0.0)
        ys.insert(0, ys[0])
    return xs, ys


def kl_time_shift(beta: SontagKL, phi: MonotonePW, a: float = 1.0,
                  slack: float = 1e-6) -> Tuple[SontagKL, ConstructionTrace]:
    """Trade a KL bound in elapsed time for one in elapsed time plus jump count.

    Given a nondecreasing ``phi`` bounding the number of jumps in any window of
    length s, returns ``beta_hat`` with beta(r, s) <= beta_hat(r, s + phi(s)).
    """
    if beta.warp is not None:
        raise InvalidFunction("time shift needs an unwarped exponential bound")
    xs, ys = _with_origin(phi)
    n0 = ys[0]
    if n0 < 0:
        raise InvalidFunction("jump bound must be nonnegative")
    # psi: K-inf majorant of phi - n0, strict through a small extra slope
    psi_y = [y - n0 + slack * x for x, y in zip(xs, ys)]
    psi_y[0] = 0.0
    psi = MonotonePW(tuple(xs), tuple(psi_y), phi.tail_slope + slack, True, True, True)
    psi_inv = monotone_inverse(psi)
    if n0 > 0:
        rho = MonotonePW((0.0, n0) + tuple(n0 + v for v in psi_inv.breakpoints[1:]),
                         (0.0, 0.0) + psi_inv.values[1:], psi_inv.tail_slope,
                         zero_at_zero=True, strict=False, unbounded=True)
        sig_x = (0.0, n0) + tuple(n0 + v for v in psi_inv.breakpoints[1:])
        sig_y = (0.0, a) + tuple(a + v for v in psi_inv.values[1:])
    else:
        a = 0.0
        rho = psi_inv
        sig_x, sig_y = psi_inv.breakpoints, psi_inv.values
    sigma_hat = MonotonePW(sig_x, sig_y, psi_inv.tail_slope, True, True, True)
    clamped = [0.0]
    for i in range(1, len(sig_x)):
        step = min(1.0, sigma_hat._slopes[i - 1]) * (sig_x[i] - sig_x[i - 1])
        clamped.append(clamped[-1] + step)
    sigma = MonotonePW(sig_x, tuple(clamped), min(1.0, psi_inv.tail_slope), True, True, True)
    beta_hat = SontagKL(beta.alpha1, beta.alpha2, rate=beta.rate / 2.0,
                        scale=beta.scale * math.exp(beta.rate * a / 2.0), warp=sigma)
    return beta_hat, ConstructionTrace(n0, a, psi, rho, sigma_hat, sigma)


# ------------------------------------------------------ integral transform


class Transform:
    """F(r) = integral from 1 to r of ds / phi(s), computed in log coordinates.

    Nodes sit at u = k * step (u = ln s) so F(1) = 0 exactly; between nodes
    the value is completed with adaptive quadrature.
    """

    def __init__(self, phi: ScalarFn, r_lo: float = 1e-9, r_hi: float = 1e12,
                 step: float = 0.25, tol: float = 1e-10):
        if not (0 < r_lo < 1 < r_hi):
            raise ValueError("need 0 < r_lo < 1 < r_hi")
        self.phi = phi
        self.step = step
        self.tol = tol
        self.k_lo = math.floor(math.log(r_lo) / step)
        self.k_hi = math.ceil(math.log(r_hi) / step)
        self._cum: Dict[int, float] = {0: 0.0}
        for k in range(1, self.k_hi + 1):
            self._cum[k] = self._cum[k - 1] + self._panel(k - 1)
        for k in range(-1, self.k_lo - 1, -1):
            self._cum[k] = self._cum[k + 1] - self._panel(k)

    def _g(self, u: float) -> float:
        s = math.exp(u)
        p = self.phi(s)
        if not p > 0.0:
            raise InvalidFunction(f"denominator {p!r} is not positive at s={s!r}")
        return s / p

    def _panel(self, k: int) -> float:
        return adaptive_simpson(self._g, k * self.step, (k + 1) * self.step, self.tol)

    def _node(self, k: int) -> float:
        if k in self._cum:
            return self._cum[k]
        # extend the table outward on demand
        if k > 0:
            top = max(self._cum)
            for j in range(top + 1, k + 1):
                self._cum[j] = self._cum[j - 1] + self._panel(j - 1)
        else:
            bottom = min(self._cum)
            for j in range(bottom - 1, k - 1, -1):
                self._cum[j] = self._cum[j + 1] - self._panel(j)
        return self._cum[k]

    def of_log(self, u: float) -> float:
        if u == math.inf:
            return math.inf
        k = math.floor(u / self.step)
        base = self._node(k)
        u0 = k * self.step
        if u == u0:
            return base
        return base + adaptive_simpson(self._g, u0, u, self.tol)

    def __call__(self, r: float) -> float:
        if r <= 0.0:
            raise ValueError("F is defined for r > 0")
        if math.isinf(r):
            return math.inf
        return self.of_log(math.log(r))

    def inverse(self, y: float) -> float:
        """Smallest r with F(r) = y; 0 below the range of F, inf above it."""
        if math.isnan(y):
            raise ValueError("NaN target")
        k_min, k_max = -3000, 3000  # |u| up to 750 covers all doubles
        k = 0
        if y >= 0.0:
            while self._node(k + 1) < y:
                k += 1
                if k >= k_max or not math.isfinite(self._node(k)):
                    return math.inf
        else:
            while self._node(k) > y:
                k -= 1
                if k <= k_min:
                    return 0.0
        lo, hi = k * self.step, (k + 1) * self.step
        flo, fhi = self._node(k), self._node(k + 1)
        if y == flo:
            return math.exp(lo)
        if y == fhi:
            return math.exp(hi)
        u = brentq(lambda v: self.of_log(v) - y, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
        return math.exp(u)


def f_transform(phi: ScalarFn, r_lo: float = 1e-9, r_hi: float = 1e12) -> Transform:
    return Transform(phi, r_lo, r_hi)


def check_divergence(F: Transform, cutoff: float = DIVERGENCE_CUTOFF,
                     threshold: float = DIVERGENCE_THRESHOLD) -> float:
    """Numerical evidence that F(r) -> inf as r -> inf; returns F(cutoff)."""
    try:
        v = F(cutoff)
    except InvalidFunction:
        raise
    if not v > threshold:
        raise DivergenceUnverified(
            f"F({cutoff:g}) = {v:.6g} does not exceed {threshold:g}", v, cutoff)
    return v


# ------------------------------------------------------ window integrals


def window_integral_bounds(rate: Union[float, ScalarFn, Expr], theta: float,
                           t_grid: Optional[Sequence[float]] = None) -> Tuple[float, float]:
    """inf and sup over t of the integral of ``rate`` over [t, t + theta].

    A constant (or an expression without ``t``) is integrated exactly; other
    rates are sampled on ``t_grid`` (default: 401 points on [0, 10]).
    """
    if isinstance(rate, (int, float)):
        v = float(rate) * theta
        return v, v
    if isinstance(rate, (exprdsl.Const, exprdsl.Var, exprdsl.Unary, exprdsl.Binary, exprdsl.IfLe)):
        if "t" not in exprdsl.free_vars(rate):
            v = exprdsl.evaluate(rate, {}) * theta
            return v, v
        fn = exprdsl.compile_expr(rate, ["t"])
    else:
        fn = rate
    grid = np.linspace(0.0, 10.0, 401) if t_grid is None else np.asarray(t_grid, float)
    vals = [adaptive_simpson(fn, float(t), float(t) + theta, 1e-10) for t in grid]
    return float(min(vals)), float(max(vals))


# --------------------------------------------------------- K-inf envelope


@dataclass
class EnvelopeResult:
    alpha_bar: MonotonePW
    mode: str
    jump_integral: float     # sup (min_dwell) or inf (max_dwell) over a
    flow_integral: float     # inf (min_dwell) or sup (max_dwell) over t
    margin: float
    target: float            # integral level the envelope was built for
    residual: float          # worst deviation of the rebuilt integral on the grid
    transform: Transform = field(repr=False, default=None)


def kinf_envelope(alpha: ScalarFn, phi: ScalarFn, rate_p, theta: float, mode: str,
                  a_grid: Optional[Sequence[float]] = None,
                  t_grid: Optional[Sequence[float]] = None,
                  transform: Optional[Transform] = None,
                  divergence_cutoff: float = DIVERGENCE_CUTOFF) -> EnvelopeResult:
    """Replace a positive-definite jump bound ``alpha`` by a K-infinity one.

    ``phi`` is the positive denominator of the integrals (for the
    maximum-dwell mode pass minus the flow rate).

    mode ``min_dwell``: requires sup_a int_a^alpha(a) ds/phi < inf_t int p = M.
    mode ``max_dwell``: requires int_1^inf ds/phi = inf and
    inf_a int_alpha(a)^a ds/phi > sup_t int p.
    """
    grid = [float(a) for a in (DEFAULT_A_GRID if a_grid is None else a_grid)]
    F = transform if transform is not None else f_transform(phi)
    p_lo, p_hi = window_integral_bounds(rate_p, theta, t_grid)
    Fa = [F(a) for a in grid]
    if mode == "min_dwell":
        jumps = [F(alpha(a)) - fa for a, fa in zip(grid, Fa)]
        i_max = int(np.argmax(jumps))
        N, M = jumps[i_max], p_lo
        if not (M > 0.0 and N < M):
            raise ConditionViolated(
                "jump integral does not stay below the flow integral",
                {"a": grid[i_max], "jump_integral": N, "flow_integral": M})
        target = 0.5 * (max(N, 0.0) + M)
        vals = []
        for a, fa in zip(grid, Fa):
            v = F.inverse(fa + target)
            if math.isinf(v):
                floor = 2.0 * max(alpha(a), a)
                v = max(floor, 2.0 * vals[-1] if vals else floor)
            if vals and v <= vals[-1]:
                v = math.nextafter(vals[-1], math.inf)
            vals.append(v)
        bar = MonotonePW.from_points([0.0] + grid, [0.0] + vals, vals[-1] / grid[-1])
        rebuilt = [F(bar(a)) - fa for a, fa in zip(grid, Fa)]
        residual = max(0.0, max(rebuilt) - target)
        return EnvelopeResult(bar, mode, N, M, M - N, target, residual, F)
    if mode == "max_dwell":
        check_divergence(F, divergence_cutoff)
        gaps = [fa - F(alpha(a)) for a, fa in zip(grid, Fa)]
        i_min = int(np.argmin(gaps))
        N, M = gaps[i_min], p_hi
        if not N > M:
            raise ConditionViolated(
                "jump integral does not exceed the flow integral",
                {"a": grid[i_min], "jump_integral": N, "flow_integral": M})
        vals = []
        for fa in Fa:
            v = F.inverse(fa - N)
            if vals and v <= vals[-1]:
                v = math.nextafter(vals[-1], math.inf)
            vals.append(v)
        bar = MonotonePW.from_points([0.0] + grid, [0.0] + vals, vals[-1] / grid[-1])
        residual = max(abs((fa - F(v)) - N) for fa, v in zip(Fa, vals) if v > 0)
        return EnvelopeResult(bar, mode, N, M, N - M, N, residual, F)
    raise ValueError(f"unknown mode {mode!r}")


# ---------------------------------------------------------- combinators


@dataclass(frozen=True, eq=False)
class Composite:
    """outer(inner(r)), optionally scaled: scale * outer(inner(r))."""

    outer: ScalarFn
    inner: ScalarFn
    scale: float = 1.0

    def __call__(self, r):
        if np.ndim(r) == 0:
            return self.scale * self.outer(self.inner(float(r)))
        arr = np.asarray(r, float)
        return self.scale * _apply(self.outer, _apply(self.inner, arr))

    def to_dict(self) -> Dict[str, Any]:
        enc = lambda f: f.to_dict() if hasattr(f, "to_dict") else {"kind": "callable"}
        return {"kind": "compose", "outer": enc(self.outer), "inner": enc(self.inner),
                "scale": self.scale}


@dataclass(frozen=True, eq=False)
class PointwiseMax:
    first: ScalarFn
    second: ScalarFn

    def __call__(self, r):
        if np.ndim(r) == 0:
            return max(self.first(float(r)), self.second(float(r)))
        arr = np.asarray(r, float)
        return np.maximum(_apply(self.first, arr), _apply(self.second, arr))

    def to_dict(self) -> Dict[str, Any]:
        enc = lambda f: f.to_dict() if hasattr(f, "to_dict") else {"kind": "callable"}
        return {"kind": "max", "first": enc(self.first), "second": enc(self.second)}
