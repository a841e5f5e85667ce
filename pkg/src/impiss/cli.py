"""Command-line front end.

    impiss run CONFIG [--out DIR] [--seed-override N] [--parallel]
    impiss example ID [--out DIR] [--param key=value ...]
    impiss validate CONFIG [--dump FILE]

A run config is JSON (see ``CONFIG_SCHEMA``) declaring impulse sequences,
systems, named hypothesis parameter sets and an ordered task list.  Artifacts
(CSV trajectories, JSON certificates and reports, ``manifest.json``) land in
the output directory, which defaults to ``$IMPISS_OUT`` or ``./impiss_out``.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import copy
import hashlib
import json
import math
import os
import platform
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import jsonschema
import numpy as np
import scipy

from . import __version__, exprdsl
from .certify import (AssumptionGrid, Certificate, IssCase, LyapunovHypothesis, check_cor1,
                      check_thm2, check_thm3, check_thm4, check_thm5, check_thm6,
                      falsify, FalsifyOptions, iss_check, sample_assumption, lyapunov_iss_envelope,
                      certificate_beta)
from .comparison import example2_comparison, solve_equation, solve_example2
from .funcspace import (MonotonePW, PointwiseMax, PosDefFn, SontagKL, adaptive_simpson)
from .hybridsim import (ImpulsiveSystem, InputSignal, MeasureFn, SolverOptions,
                        SwitchedImpulsiveSystem, simulate, trajectory_csv)
from .timing import (DwellClassSpec, ImpulseSeq, cyclic_switching, generate, uib_evidence,
                     uib_profile)

ENV_OUT = "IMPISS_OUT"
EXAMPLE_IDS = ("harmonic_uib", "family_example2", "example2", "scalar_ld", "switched_2d")


class ConfigError(ValueError):
    pass


class AssertionFailed(AssertionError):
    """A reproduction check did not hold; the message is a diff report."""


# ------------------------------------------------------------------ schema

_EXPR_LIST = {"type": "array", "items": {"type": "string"}, "minItems": 1}
_NUM = {"type": "number"}

CONFIG_SCHEMA: Dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["tasks"],
    "properties": {
        "output": {"type": "string"},
        "seeds": {"type": "object", "properties": {"root": {"type": "integer"}},
                  "additionalProperties": False},
        "solver": {"type": "object", "additionalProperties": False,
                   "properties": {"h0": {"type": "number", "exclusiveMinimum": 0},
                                  "escape_norm": {"type": "number", "exclusiveMinimum": 0},
                                  "escape_tol": {"type": "number", "exclusiveMinimum": 0}}},
        "sequences": {"type": "object", "additionalProperties": {
            "type": "object", "required": ["horizon"],
            "properties": {
                "horizon": {"type": "number", "exclusiveMinimum": 0},
                "times": {"type": "array", "items": _NUM},
                "generator": {"type": "string"},
                "params": {"type": "object"},
                "seed": {"type": "integer"},
                "switching": {"type": "array", "minItems": 1, "items": {
                    "type": "array", "minItems": 3, "maxItems": 3}},
            },
            "oneOf": [{"required": ["times"]}, {"required": ["generator"]},
                      {"required": ["switching"]}],
            "additionalProperties": False}},
        "systems": {"type": "object", "additionalProperties": {
            "type": "object", "required": ["type", "sequence"],
            "properties": {
                "type": {"enum": ["impulsive", "switched"]},
                "sequence": {"type": "string"},
                "m": {"type": "integer", "minimum": 1},
                "flow": _EXPR_LIST, "jump": _EXPR_LIST,
                "flows": {"type": "object", "additionalProperties": _EXPR_LIST},
                "jumps": {"type": "object", "additionalProperties": _EXPR_LIST},
            },
            "additionalProperties": False}},
        "hypotheses": {"type": "object", "additionalProperties": {"type": "object"}},
        "tasks": {"type": "array", "items": {
            "type": "object", "required": ["task", "name"],
            "properties": {
                "task": {"enum": ["simulate", "certify", "iss_check", "falsify", "example"]},
                "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
                "system": {"type": "string"},
                "theorem": {"enum": ["thm2", "thm3", "cor1", "thm4", "thm5", "thm6"]},
                "hypothesis": {"type": "string"},
                "sequences": {"type": "array", "items": {"type": "string"}},
                "params": {"type": "object"},
                "id": {"enum": list(EXAMPLE_IDS)},
                "t0": _NUM, "t_end": _NUM,
                "x0": {"type": "array", "items": _NUM},
                "input": {"type": "object"},
                "expect_fail": {"type": "boolean"},
            },
            "additionalProperties": False}},
    },
}


def _path(parts) -> str:
    return "/".join(str(p) for p in parts) or "<root>"


def validate_config(cfg: Any) -> Dict[str, Any]:
    """Schema check plus cross-reference check; returns the config with
    defaults filled in.  Raises ConfigError naming the offending field."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ConfigError(f"{_path(e.absolute_path)}: {e.message}")
    cfg = copy.deepcopy(cfg)
    cfg.setdefault("seeds", {}).setdefault("root", 0)
    cfg.setdefault("solver", {})
    cfg.setdefault("sequences", {})
    cfg.setdefault("systems", {})
    cfg.setdefault("hypotheses", {})
    seqs, systems, hyps = cfg["sequences"], cfg["systems"], cfg["hypotheses"]
    for name, sd in systems.items():
        if sd["sequence"] not in seqs:
            raise ConfigError(f"systems/{name}/sequence: undeclared sequence {sd['sequence']!r}")
        need = ("flow", "jump") if sd["type"] == "impulsive" else ("flows", "jumps")
        for key in need:
            if key not in sd:
                raise ConfigError(f"systems/{name}/{key}: required for {sd['type']} systems")
        if sd["type"] == "switched" and "switching" not in seqs[sd["sequence"]]:
            raise ConfigError(f"systems/{name}/sequence: switched systems need a switching sequence")
    names = set()
    required = {"simulate": ("system", "x0", "t_end"), "certify": ("theorem",),
                "iss_check": ("system",), "falsify": ("system",), "example": ("id",)}
    for i, task in enumerate(cfg["tasks"]):
        where = f"tasks/{i}"
        if task["name"] in names:
            raise ConfigError(f"{where}/name: duplicate task name {task['name']!r}")
        names.add(task["name"])
        for key in required[task["task"]]:
            if key not in task:
                raise ConfigError(f"{where}/{key}: required for {task['task']} tasks")
        if "system" in task and task["system"] not in systems:
            raise ConfigError(f"{where}/system: undeclared system {task['system']!r}")
        if "hypothesis" in task and task["hypothesis"] not in hyps:
            raise ConfigError(f"{where}/hypothesis: undeclared hypothesis {task['hypothesis']!r}")
        for j, s in enumerate(task.get("sequences", [])):
            if s not in seqs:
                raise ConfigError(f"{where}/sequences/{j}: undeclared sequence {s!r}")
    return cfg


def load_config(path: str) -> Dict[str, Any]:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"<file>: invalid JSON ({exc})") from None
    return validate_config(raw)


# ---------------------------------------------------------------- building


@dataclass
class _Context:
    cfg: Dict[str, Any]
    root_seed: int
    opts: SolverOptions
    sequences: Dict[str, Any]
    systems: Dict[str, Any]


def _build_sequence(sd: Dict[str, Any], root_seed: int):
    H = float(sd["horizon"])
    if "times" in sd:
        return ImpulseSeq(tuple(float(t) for t in sd["times"]), H)
    if "generator" in sd:
        seed = root_seed + int(sd.get("seed", 0))
        return generate(sd["generator"], H, seed, **sd.get("params", {}))
    segs = [(int(m), float(d), int(j)) for m, d, j in sd["switching"]]
    return cyclic_switching(segs, H)


def _build_context(cfg: Dict[str, Any], seed_override: Optional[int]) -> _Context:
    root = cfg["seeds"]["root"] if seed_override is None else int(seed_override)
    opts = SolverOptions(**cfg["solver"])
    seqs = {k: _build_sequence(v, root) for k, v in sorted(cfg["sequences"].items())}
    systems = {}
    for name, sd in sorted(cfg["systems"].items()):
        seq = seqs[sd["sequence"]]
        m = int(sd.get("m", 1))
        if sd["type"] == "impulsive":
            gamma = seq if isinstance(seq, ImpulseSeq) else seq.gamma
            systems[name] = ImpulsiveSystem.from_text(sd["flow"], sd["jump"], gamma, m)
        else:
            systems[name] = SwitchedImpulsiveSystem.from_text(
                {int(k): v for k, v in sd["flows"].items()},
                {int(k): v for k, v in sd["jumps"].items()}, seq, m)
    return _Context(cfg, root, opts, seqs, systems)


def _input(spec: Optional[Dict[str, Any]], m: int) -> InputSignal:
    if not spec:
        return InputSignal.zero(m)
    if "constant" in spec:
        return InputSignal.constant(spec["constant"])
    return InputSignal(tuple(float(s) for s in spec["starts"]),
                       tuple(tuple(float(v) for v in row) for row in spec["values"]), {}, m)


def _fn(text: str) -> PosDefFn:
    return PosDefFn.from_text(text)


def _beta(spec: Dict[str, Any]) -> SontagKL:
    a1 = _fn(spec["alpha1"]) if "alpha1" in spec else MonotonePW.identity()
    a2 = _fn(spec["alpha2"]) if "alpha2" in spec else MonotonePW.identity()
    return SontagKL(a1, a2, float(spec["rate"]), float(spec.get("scale", 1.0)))


# ------------------------------------------------------------------- tasks


def _gammas(ctx: _Context, names: Sequence[str]):
    out = []
    for n in names:
        s = ctx.sequences[n]
        out.append(s if isinstance(s, ImpulseSeq) else s.gamma)
    return out


def _certify(ctx: _Context, task: Dict[str, Any]) -> Certificate:
    params = dict(ctx.cfg["hypotheses"].get(task.get("hypothesis"), {}))
    params.update(task.get("params", {}))
    thm = task["theorem"]
    names = task.get("sequences", [])
    if thm == "thm2":
        I = MonotonePW.identity()
        hyp = LyapunovHypothesis.general(1, "abs(x1)", params.get("rate", "r"), "r", I, I, I, I)
        return check_thm2(hyp, _gammas(ctx, names), float(params.get("horizon", 10.0)))
    if thm == "thm3":
        return check_thm3(params["phi"], float(params["d"]), _gammas(ctx, names),
                          params.get("mode", "weak"), params.get("kappa"), params.get("c"),
                          params.get("eta"), params.get("mu"))
    if thm == "cor1":
        spec = DwellClassSpec(params["kind"], n0=float(params["n0"]),
                              tau_d=float(params["tau_d"]))
        return check_cor1(float(params["c"]), float(params["d"]), spec)
    if thm == "thm4":
        return check_thm4(params["alpha_bar"], params["phi_bar"], params.get("p", 1.0),
                          float(params["theta"]), params["mode"], _gammas(ctx, names))
    if thm == "thm5":
        sigmas = [ctx.sequences[n] for n in names]
        fc = {int(k): v for k, v in params["flow_classes"].items()}
        jc = {(int(a), int(b), int(j)): c for a, b, j, c in params["jump_classes"]}
        return check_thm5(sigmas, fc, jc, float(params["c_s"]), float(params["c_u"]),
                          float(params["d_s"]), float(params["d_u"]), params.get("mode", "weak"),
                          params.get("eta"), params.get("mu"))
    modes = {int(k): (v.get("p", 1.0), v["phi_bar"]) for k, v in params["modes"].items()}
    thetas = {int(k): float(v) for k, v in params["thetas"].items()}
    sigmas = [ctx.sequences[n] for n in names]
    return check_thm6(modes, params["alpha_bar"], thetas, params["mode"], sigmas)


def _envelope_args(task: Dict[str, Any], n: int):
    p = task.get("params", {})
    h = MeasureFn.from_text(p.get("h", "abs(x1)"), n)
    h0 = MeasureFn.from_text(p.get("h0", "abs(x1)"), n)
    beta = _beta(p["beta"])
    rho = _fn(p.get("rho", "r"))
    return p, h, h0, beta, rho


def _run_task(ctx: _Context, task: Dict[str, Any]) -> Tuple[Dict[str, str], Dict[str, Any]]:
    """Returns (artifacts {relative path: text}, summary)."""
    kind, name = task["task"], task["name"]
    if kind == "simulate":
        sys_ = ctx.systems[task["system"]]
        u = _input(task.get("input"), sys_.m)
        traj = simulate(sys_, float(task.get("t0", 0.0)), task["x0"], u, float(task["t_end"]),
                        ctx.opts)
        return {f"{name}.csv": trajectory_csv(traj)}, {"status": traj.status, "ok": True}
    if kind == "certify":
        cert = _certify(ctx, task)
        ok = cert.verdict != "fails" or bool(task.get("expect_fail"))
        return {f"{name}.json": cert.to_json() + "\n"}, {"verdict": cert.verdict, "ok": ok}
    if kind in ("iss_check", "falsify"):
        sys_ = ctx.systems[task["system"]]
        p, h, h0, beta, rho = _envelope_args(task, sys_.n)
        mode = p.get("mode", "weak")
        if kind == "iss_check":
            cases = []
            for c in p.get("cases", [{"t0": 0.0, "x0": [1.0] * sys_.n}]):
                u = _input(c.get("input"), sys_.m)
                t0 = float(c.get("t0", 0.0))
                t_end = float(c.get("t_end", min(t0 + 5.0, sys_.impulses.horizon)))
                traj = simulate(sys_, t0, c["x0"], u, t_end, ctx.opts)
                cases.append(IssCase(traj, u, sys_.impulses))
            rep = iss_check(cases, h, h0, beta, rho, mode)
            out = {"passed": rep.passed, "worst_margin": rep.worst_margin,
                   "witness": rep.witness, "samples": rep.samples}
            ok = rep.passed or bool(task.get("expect_fail"))
            return {f"{name}.json": _dump(out)}, {"passed": rep.passed, "ok": ok}
        fo = FalsifyOptions(**{k: (tuple(v) if isinstance(v, list) else v)
                               for k, v in p.get("options", {}).items()})
        res = falsify(sys_, h, h0, beta, rho, mode, int(p.get("budget", 100)),
                      ctx.root_seed + int(p.get("seed", 0)), fo)
        out = {"verdict": res.verdict, "trials": res.trials, "counterexample": res.counterexample}
        ok = res.verdict == "no_counterexample" or bool(task.get("expect_fail"))
        return {f"{name}.json": _dump(out)}, {"verdict": res.verdict, "ok": ok}
    arts = repro_example(task["id"], **task.get("params", {}))
    return {f"{name}/{k}": v for k, v in arts.items()}, {"ok": True}


def _dump(obj: Any) -> str:
    from .certify import _clean
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def run_config(cfg: Dict[str, Any], out_dir: str, seed_override: Optional[int] = None,
               parallel: bool = False) -> int:
    """Run every task; returns the process exit status."""
    ctx = _build_context(cfg, seed_override)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def guarded(task):
        try:
            arts, summary = _run_task(ctx, task)
            return arts, summary, None
        except AssertionFailed as exc:
            return {}, {"ok": False}, f"assertion failed:\n{exc}"
        except Exception as exc:  # report and keep going
            return {}, {"ok": False}, f"{type(exc).__name__}: {exc}"

    tasks = cfg["tasks"]
    if parallel and len(tasks) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=min(4, len(tasks))) as ex:
            results = list(ex.map(guarded, tasks))
    else:
        results = [guarded(t) for t in tasks]
    entries, status = [], 0
    for task, (arts, summary, err) in zip(tasks, results):
        for rel, text in sorted(arts.items()):
            path = out / rel
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text)
        entry = {"name": task["name"], "task": task["task"], "artifacts": sorted(arts),
                 "summary": {k: v for k, v in summary.items() if k != "ok"},
                 "ok": bool(summary.get("ok")) and err is None}
        if err:
            entry["error"] = err
            print(f"[{task['name']}] {err}", file=sys.stderr)
        if not entry["ok"]:
            status = 1
        entries.append(entry)
    manifest = {
        "package_version": __version__, "python": platform.python_version(),
        "numpy": np.__version__, "scipy": scipy.__version__, "root_seed": ctx.root_seed,
        "config_sha256": hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest(),
        "tasks": entries, "created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    (out / "manifest.json").write_text(_dump(manifest))
    return status


# ------------------------------------------------------------- reproductions


def _check(cond: bool, label: str, expected: Any, observed: Any) -> None:
    if not cond:
        raise AssertionFailed(f"{label}\n  expected: {expected}\n  observed: {observed}")


def repro_harmonic_uib(horizon: float = 12.0, delta: float = 1.0) -> Dict[str, str]:
    gamma = generate("harmonic", horizon)
    ev = uib_evidence(gamma, delta, 3)
    _check(not ev["bounded"], "window counts should keep increasing", "growing", ev["counts"])
    deltas = [0.25, 0.5, 1.0, 2.0]
    rows = ["split_start,split_end," + ",".join(f"delta_{d!r}" for d in deltas)]
    edges = np.linspace(0.0, horizon, 4)
    per = {d: uib_evidence(gamma, d, 3)["counts"] for d in deltas}
    for i, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
        rows.append(",".join([repr(float(lo)), repr(float(hi))] + [str(per[d][i]) for d in deltas]))
    I = MonotonePW.identity()
    hyp = LyapunovHypothesis.general(1, "abs(x1)", "r", "r", I, I, I, I)
    cert = check_thm2(hyp, [gamma], horizon=6.0)
    _check(cert.conclusions.get("weak") == "holds", "weak verdict", "holds", cert.conclusions)
    _check(cert.conclusions.get("strong") == "inconclusive", "strong verdict", "inconclusive",
           cert.conclusions)
    return {"uib_table.csv": "\n".join(rows) + "\n",
            "evidence.json": _dump({"delta": delta, "counts": ev["counts"],
                                    "bounded": ev["bounded"], "events": len(gamma)}),
            "thm2.json": cert.to_json() + "\n"}


def example2_t_end(lam: float, t0: float) -> float:
    """Simulation end time keeping the impulse count manageable."""
    span = min(3.0, 9.0 / lam - t0)
    return t0 + (span if span > 0.25 else 0.25)


def repro_family_example2(lam: float = 2.0, eta: str = "r", h0: float = 1e-4,
                          t0s: Sequence[float] = (0.0, 0.3, 2.0),
                          w0s: Sequence[float] = (0.1, 1.0, 10.0)) -> Dict[str, str]:
    lam = float(lam)
    eta_fn = PosDefFn.from_text(eta)
    pi = lambda r: max(eta_fn(r), r)
    horizon = max(example2_t_end(lam, t0) for t0 in t0s)
    gamma = generate("example2", horizon, lam=lam)
    cs = example2_comparison(lam, gamma, eta)
    rows, worst, err_max, rep_csv = [], math.inf, 0.0, None
    for t0 in t0s:
        for w0 in w0s:
            t_end = example2_t_end(lam, t0)
            closed = solve_example2(lam, t0, w0, t_end, eta_fn, h0, gamma)
            ts, ws, _ = closed.points()
            bound = pi(w0) * math.exp(2.0) * np.exp(-(ts - t0))
            margin = float(np.min(bound - ws[:, 0]))
            num = solve_equation(cs, t0, w0, t_end, SolverOptions(h0=h0))
            tn, wn, _ = num.points()
            if tn.shape == ts.shape and np.array_equal(tn, ts):
                err = float(np.max(np.abs(wn[:, 0] - ws[:, 0])))
            else:
                err = float(np.max(np.abs(np.interp(ts, tn, wn[:, 0]) - ws[:, 0])))
            worst, err_max = min(worst, margin), max(err_max, err)
            rows.append({"t0": t0, "w0": w0, "t_end": t_end, "jumps": len(closed.jumps),
                         "min_margin": margin, "numeric_error": err})
            if t0 == t0s[0] and w0 == w0s[len(w0s) // 2]:
                rep_csv = trajectory_csv(closed)
    _check(worst >= -1e-9, "bound w <= pi(w0) e^2 e^-(t-t0)", ">= -1e-9", worst)
    _check(err_max <= 1e-4, "numeric vs closed form", "<= 1e-4", err_max)
    report = {"lam": lam, "eta": eta, "cases": rows, "worst_margin": worst,
              "max_numeric_error": err_max, "envelope": "max(eta, id)(r) * e^2 * e^-s"}
    return {"report.json": _dump(report), "trajectory.csv": rep_csv}


SCALAR_ALPHA = "if_le(r, 1, r*2^(-r), 0.5)"
SCALAR_NEG_RATE = "if_le(r, 1, r^2, r)"


def scalar_ld_integrals(n: int = 50) -> List[Tuple[float, float, float]]:
    """(a, quadrature, closed form) for int_{alpha(a)}^a ds / s^2 on (0, 1]."""
    alpha = PosDefFn.from_text(SCALAR_ALPHA)
    out = []
    for a in np.linspace(1.0 / n, 1.0, n):
        a = float(a)
        q = adaptive_simpson(lambda s: 1.0 / (s * s), alpha(a), a, 1e-12)
        closed = (2.0 ** a - 1.0) / a  # (1 - 2 delta) / (2 delta a) with delta = 2^(-a-1)
        out.append((a, q, closed))
    return out


def repro_scalar_ld(theta: float = 0.4) -> Dict[str, str]:
    rows = scalar_ld_integrals()
    for a, q, closed in rows:
        _check(abs(q - closed) <= 1e-6, f"integral at a={a}", closed, q)
        _check(q >= 0.5, f"integral lower bound at a={a}", ">= 0.5", q)
    neg = PosDefFn.from_text(SCALAR_NEG_RATE)
    alpha = PosDefFn.from_text(SCALAR_ALPHA)
    big = []
    for a in (1.0, 1.5, 2.0, 5.0, 20.0, 100.0):
        v = adaptive_simpson(lambda s: 1.0 / neg(s), alpha(a), a, 1e-12)
        big.append((a, v))
        _check(v >= 1.0 - 1e-12, f"integral lower bound at a={a}", ">= 1", v)
    esc_sys = ImpulsiveSystem.from_text(["x1^2/2"], ["0"], ImpulseSeq((), 1.0))
    traj = simulate(esc_sys, 0.0, (8.0,), None, 1.0)
    _check(traj.status == "escaped" and 0.2375 <= traj.t_escape <= 0.2625,
           "escape near 1/4", "[0.2375, 0.2625]", (traj.status, traj.t_escape))
    cert = check_thm4(SCALAR_ALPHA, f"-({SCALAR_NEG_RATE})", 1.0, theta, "max_dwell")
    _check(cert.holds, "max dwell-time certificate", "holds", cert.verdict)
    bad = check_thm4(SCALAR_ALPHA, "-r^2", 1.0, theta, "max_dwell")
    _check(bad.verdict == "inconclusive", "certificate without divergence", "inconclusive",
           bad.verdict)
    table = ["a,quadrature,closed_form"] + [f"{a!r},{q!r},{c!r}" for a, q, c in rows]
    table += [f"{a!r},{v!r}," for a, v in big]
    return {"integrals.csv": "\n".join(table) + "\n", "escape.csv": trajectory_csv(traj),
            "thm4.json": cert.to_json() + "\n", "thm4_no_divergence.json": bad.to_json() + "\n"}


# switched second-order example -------------------------------------------

SW_FLOWS = {1: ["-x2*u1", "x1*u1"],
            2: ["-x1 + u1", "x2 + (x1^2 + x2^2)*u1"],
            3: ["x1 + u1", "-x1 + x2 + u1"]}
SW_JUMPS = {1: ["0", "0"], 2: ["-x1", "x1 - x2"], 3: ["x2", "-x2"]}
SW_J = frozenset([(1, 1, 1), (1, 2, 1), (1, 3, 1), (1, 1, 3), (1, 2, 3), (1, 3, 3), (2, 1, 2),
                  (2, 2, 1), (2, 2, 2), (2, 3, 1), (3, 1, 2), (3, 2, 1), (3, 2, 2), (3, 3, 1)])
SW_FLOW_CLASSES = {1: "n", 2: "s", 3: "u"}
SW_JUMP_CLASSES = {tr: ("s" if tr in {(2, 2, 2), (3, 2, 2)} else
                        "u" if tr in {(1, 1, 3), (1, 2, 3), (1, 3, 3)} else "n") for tr in SW_J}
SW_V = {1: "(x1^2 + x2^2)/2", 2: "x1^2/2", 3: "x1^2/2"}


def switched_sigma(case: str, horizon: float = 20.0, p_s: float = 0.95, p_n: float = 0.01):
    """Case a: every unit window contains a stabilizing jump.  Case b: a
    period-1 cycle neutral -> stable -> unstable with one destabilizing jump."""
    if case == "a":
        return cyclic_switching([(3, 0.5, 2), (2, 0.5, 1)], horizon, SW_J)
    return cyclic_switching([(1, p_n, 3), (2, p_s, 1), (3, 1.0 - p_s - p_n, 2)], horizon, SW_J)


def switched_hypothesis() -> LyapunovHypothesis:
    half_sq = PosDefFn.from_text("r^2/2")
    return LyapunovHypothesis.switched_exp(
        2, SW_V, SW_FLOW_CLASSES, SW_JUMP_CLASSES, 1.0, 3.0, 0.0, 2.0, half_sq, half_sq,
        PosDefFn.from_text("2*r^2"), PosDefFn.from_text("4*r^2"), h="abs(x1)",
        h0="sqrt(x1^2 + x2^2)")


def switched_envelope(cert: Certificate):
    """ISS pair for h = |x1|, h0 = |x| from a window certificate."""
    beta = certificate_beta(cert)
    return lyapunov_iss_envelope(beta, PosDefFn.from_text("sqrt(2*r)"), PosDefFn.from_text("r^2/2"),
                             PosDefFn.from_text("2*r^2"), PosDefFn.from_text("4*r^2"))


def switched_ensemble(sigma, n_runs: int = 12, seed: int = 0, u_max: float = 0.2,
                      x_max: float = 2.0, duration: float = 10.0):
    rng = np.random.default_rng(seed)
    sys_ = SwitchedImpulsiveSystem.from_text(SW_FLOWS, SW_JUMPS, sigma)
    cases = []
    for _ in range(n_runs):
        t0 = float(rng.uniform(0.0, sigma.gamma.horizon - duration))
        x0 = tuple(float(v) for v in rng.uniform(-x_max, x_max, size=2))
        starts = (t0,) + tuple(sorted(float(v) for v in rng.uniform(t0, t0 + duration, size=3)))
        vals = tuple((float(rng.uniform(-u_max, u_max)),) for _ in starts)
        u = InputSignal(starts, vals, {}, 1)
        traj = simulate(sys_, t0, x0, u, t0 + duration, SolverOptions(h0=1e-3))
        cases.append(IssCase(traj, u, sigma.gamma))
    return sys_, cases


def repro_switched_2d(case: str = "a", p_s: float = 0.95) -> Dict[str, str]:
    hyp = switched_hypothesis()
    sigma = switched_sigma(case, p_s=p_s)
    sys_ = SwitchedImpulsiveSystem.from_text(SW_FLOWS, SW_JUMPS, sigma)
    grid = AssumptionGrid(ts=(0.0, 1.0),
                          xs=tuple((a, b) for a in (-2.0, -0.5, 0.0, 0.3, 1.5)
                                   for b in (-1.0, 0.0, 0.7, 2.0)),
                          us=((0.0,), (0.1,), (-0.4,), (1.0,)))
    rep = sample_assumption(hyp, sys_, grid)
    _check(rep.verdict == "not_falsified", "Lyapunov conditions", "not_falsified", rep.witness)
    arts = {"assumption.json": _dump({"verdict": rep.verdict, "checked": rep.checked})}
    cert = check_thm5([sigma], SW_FLOW_CLASSES, SW_JUMP_CLASSES, 1.0, 3.0, 0.0, 2.0, "weak")
    _check(cert.holds, f"window certificate (case {case})", "holds", cert.verdict)
    arts["thm5.json"] = cert.to_json() + "\n"
    if case == "b":
        low = check_thm5([switched_sigma("b", p_s=0.90)], SW_FLOW_CLASSES, SW_JUMP_CLASSES,
                         1.0, 3.0, 0.0, 2.0, "weak")
        _check(low.verdict == "fails", "window certificate at p_s = 0.90", "fails", low.verdict)
        arts["thm5_ps090.json"] = low.to_json() + "\n"
    beta_iss, rho = switched_envelope(cert)
    _, cases = switched_ensemble(sigma)
    h = MeasureFn.from_text("abs(x1)", 2)
    h0 = MeasureFn.from_text("sqrt(x1^2 + x2^2)", 2)
    iss = iss_check(cases, h, h0, beta_iss, rho, "weak")
    _check(iss.passed, "ISS envelope on simulated trajectories", "pass", iss.witness)
    arts["iss.json"] = _dump({"passed": iss.passed, "worst_margin": iss.worst_margin,
                              "samples": iss.samples})
    arts["trajectory.csv"] = trajectory_csv(cases[0].traj)
    return arts


def repro_example(example_id: str, **params) -> Dict[str, str]:
    if example_id == "harmonic_uib":
        return repro_harmonic_uib(**params)
    if example_id in ("family_example2", "example2"):
        if "lambda" in params:
            params["lam"] = params.pop("lambda")
        return repro_family_example2(**params)
    if example_id == "scalar_ld":
        return repro_scalar_ld(**params)
    if example_id == "switched_2d":
        return repro_switched_2d(**params)
    raise KeyError(f"unknown example {example_id!r}; choose from {', '.join(EXAMPLE_IDS)}")


# --------------------------------------------------------------------- main


def _default_out() -> str:
    return os.environ.get(ENV_OUT, "impiss_out")


def _parse_param(text: str) -> Tuple[str, Any]:
    key, _, val = text.partition("=")
    try:
        return key, json.loads(val)
    except json.JSONDecodeError:
        return key, val


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = argparse.ArgumentParser(prog="impiss", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run a JSON config")
    r.add_argument("config")
    r.add_argument("--out", default=None)
    r.add_argument("--seed-override", type=int, default=None)
    r.add_argument("--parallel", action="store_true")
    e = sub.add_parser("example", help="reproduce a worked example")
    e.add_argument("id", choices=EXAMPLE_IDS)
    e.add_argument("--out", default=None)
    e.add_argument("--param", action="append", default=[], help="key=value (JSON value)")
    v = sub.add_parser("validate", help="validate a JSON config")
    v.add_argument("config")
    v.add_argument("--dump", default=None, help="write the normalized config here")
    args = ap.parse_args(argv)

    if args.cmd == "validate":
        try:
            cfg = load_config(args.config)
        except ConfigError as exc:
            print(f"invalid config: {exc}", file=sys.stderr)
            return 2
        if args.dump:
            Path(args.dump).write_text(json.dumps(cfg, sort_keys=True, indent=2) + "\n")
        print("ok")
        return 0
    if args.cmd == "run":
        try:
            cfg = load_config(args.config)
        except ConfigError as exc:
            print(f"invalid config: {exc}", file=sys.stderr)
            return 2
        out = args.out or cfg.get("output") or _default_out()
        return run_config(cfg, out, args.seed_override, args.parallel)
    params = dict(_parse_param(p) for p in args.param)
    out = Path(args.out or _default_out()) / args.id
    try:
        arts = repro_example(args.id, **params)
    except AssertionFailed as exc:
        print(f"example {args.id} failed:\n{exc}", file=sys.stderr)
        return 1
    for rel, text in sorted(arts.items()):
        p = out / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)
    print(f"wrote {len(arts)} artifacts to {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
