"""Command line front end: config parsing, run orchestration and output files.

Subcommands::

    freebound run CONFIG        solve and write fronts.csv, snapshots.csv, report.json
    freebound compare CONFIG    both schemes, sup differences printed
    freebound converge CONFIG   refinement study, orders.csv
    freebound verify CONFIG     invariant suite, pass/fail table
    freebound sweep CONFIG      parameter grid, runs in a process pool

Flags given on the command line override keys from the config file.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import itertools
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import trapezoid

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .bounds import bound_inputs, check_solution
from .direct import direct_run
from .fixedpoint import BoundViolation, WindowUnderflow, build_ledger, continue_solution
from .model import (CATALOG_DEFAULTS, INITIAL_FAMILIES, InitialData, ModelError, ProblemSpec,
                    builtin_catalog, eval_reactions, validate_initial_data)
from .parabolic import StepParams, WindowRejected
from .trajectory import SCHEMA_VERSION, Trajectory

log = logging.getLogger("freebound")

SCHEMES = ("fixedpoint", "direct", "both")
REFINE_MODES = ("time", "space", "both", "parabolic")
CLIP_LIMIT = 1e-8
EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_UNDERFLOW = 0, 1, 2, 3


class ConfigError(ValueError):
    """A config key failed validation; the message names key, value and constraint."""


@dataclass
class RunConfig:
    model: str = "epidemic"
    params: dict = field(default_factory=dict)
    h0: float = 1.0
    init: dict = field(default_factory=lambda: {"family": "cosine", "amp_u": 1.0, "amp_v": 1.0})
    d: float = 1.0
    mu: float = 1.0
    beta: float = 1.0
    t_final: float = 1.0
    n: int = 201
    dt: float = 1e-3
    theta: float = 1.0
    scheme: str = "both"
    tol_fp: float = 1e-10
    window: float = 0.05
    max_window: float = math.inf
    max_iter: int = 30
    stride: int = 10
    output: str = "out"
    strict: bool = False
    lock_fronts: bool = False
    seed: int = 0

    def step_params(self) -> StepParams:
        return StepParams(self.dt, theta=self.theta, lock_fronts=self.lock_fronts)

    def to_dict(self) -> dict:
        return asdict(self)


KNOWN_KEYS = tuple(RunConfig.__dataclass_fields__)
LOCKED_REQUIRED = ("finite", "u0_endpoint_zero", "v0_endpoint_zero")
INIT_KEYS = ("family", "amp_u", "amp_v", "x", "u0", "v0")


def _num(key, value, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}={value!r}: must be a number")
    if kind is int:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{key}={value!r}: must be an integer")
        return int(value)
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{key}={value!r}: must be finite")
    return value


def _positive(key, value):
    if not value > 0:
        raise ConfigError(f"{key} must be > 0 (got {key}={value!r})")
    return value


def validate_config(raw: dict) -> RunConfig:
    """Fill defaults and check every key; raises :class:`ConfigError`."""
    unknown = sorted(set(raw) - set(KNOWN_KEYS))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}; "
                          f"allowed: {', '.join(KNOWN_KEYS)}")
    cfg = RunConfig()
    for key, value in raw.items():
        setattr(cfg, key, value)

    if cfg.model not in CATALOG_DEFAULTS:
        raise ConfigError(f"model={cfg.model!r}: must be one of {sorted(CATALOG_DEFAULTS)}")
    if not isinstance(cfg.params, dict):
        raise ConfigError(f"params={cfg.params!r}: must be a table")
    for key in ("h0", "d", "mu", "beta", "dt", "tol_fp", "window"):
        setattr(cfg, key, _positive(key, _num(key, getattr(cfg, key))))
    if cfg.max_window != math.inf:
        cfg.max_window = _positive("max_window", _num("max_window", cfg.max_window))
    cfg.t_final = _num("t_final", cfg.t_final)
    if cfg.t_final < 0:
        raise ConfigError(f"t_final must be >= 0 (got t_final={cfg.t_final!r})")
    cfg.theta = _num("theta", cfg.theta)
    if not 0.5 <= cfg.theta <= 1.0:
        raise ConfigError(f"theta must lie in [0.5, 1] (got theta={cfg.theta!r})")
    cfg.n = _num("n", cfg.n, int)
    if cfg.n < 5:
        raise ConfigError(f"n must be >= 5 (got n={cfg.n!r})")
    for key in ("max_iter", "stride"):
        setattr(cfg, key, _positive(key, _num(key, getattr(cfg, key), int)))
    cfg.seed = _num("seed", cfg.seed, int)
    if cfg.scheme not in SCHEMES:
        raise ConfigError(f"scheme={cfg.scheme!r}: must be one of {', '.join(SCHEMES)}")
    for key in ("strict", "lock_fronts"):
        if not isinstance(getattr(cfg, key), bool):
            raise ConfigError(f"{key}={getattr(cfg, key)!r}: must be true or false")
    if not isinstance(cfg.output, str) or not cfg.output:
        raise ConfigError(f"output={cfg.output!r}: must be a non-empty path")
    _validate_init(cfg)
    # building the problem surfaces model and data errors before any compute
    build_spec(cfg)
    return cfg


def _validate_init(cfg: RunConfig):
    init = cfg.init
    if not isinstance(init, dict):
        raise ConfigError(f"init={init!r}: must be a table")
    unknown = sorted(set(init) - set(INIT_KEYS))
    if unknown:
        raise ConfigError(f"unknown init key(s): {', '.join(unknown)}; allowed: {', '.join(INIT_KEYS)}")
    if "u0" in init or "v0" in init:
        if "family" in init or "amp_u" in init or "amp_v" in init:
            raise ConfigError("init: give either a family or inline u0/v0 tables, not both")
        if "u0" not in init or "v0" not in init:
            raise ConfigError("init: inline data needs both u0 and v0")
        if "x" in init:
            x = np.asarray(init["x"], float)
            if x.size != len(init["u0"]) or not np.allclose(x, np.linspace(-cfg.h0, cfg.h0, x.size),
                                                            rtol=0, atol=1e-12 * cfg.h0):
                raise ConfigError("init.x: samples must be uniform on [-h0, h0] and match u0")
        return
    fam = init.get("family", "cosine")
    if fam not in INITIAL_FAMILIES:
        raise ConfigError(f"init.family={fam!r}: must be one of {sorted(INITIAL_FAMILIES)}")
    for key in ("amp_u", "amp_v"):
        _positive(f"init.{key}", _num(f"init.{key}", init.get(key, 1.0)))


def build_spec(cfg: RunConfig, t_final: Optional[float] = None) -> ProblemSpec:
    try:
        rp = builtin_catalog(cfg.model, cfg.params)
        init = cfg.init
        if "u0" in init:
            data = InitialData(cfg.h0, np.asarray(init["u0"], float), np.asarray(init["v0"], float))
        else:
            fam = INITIAL_FAMILIES[init.get("family", "cosine")]
            data = fam(cfg.h0, float(init.get("amp_u", 1.0)), float(init.get("amp_v", 1.0)))
        report = validate_initial_data(data)
        failed = [k for k, ok in report.checks.items() if not ok]
        if cfg.lock_fronts:
            # fixed fronts only need nonnegative data vanishing at the ends
            failed = [k for k in failed if k in LOCKED_REQUIRED]
            if data.u0.min() < 0 or data.v0.min() < 0:
                failed.append("nonnegative")
        if failed:
            raise ConfigError("init: initial data check failed: " + ", ".join(failed))
        return ProblemSpec(rp, cfg.d, cfg.mu, cfg.beta, data,
                           cfg.t_final if t_final is None else t_final)
    except ConfigError:
        raise
    except ModelError as exc:
        raise ConfigError(str(exc)) from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"params={cfg.params!r}: {exc}") from exc


def parse_config(text: str, overrides: Optional[dict] = None) -> RunConfig:
    """Parse a TOML document (plus overrides) into a validated :class:`RunConfig`."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config is not well-formed TOML: {exc}") from exc
    raw.update(overrides or {})
    return validate_config(raw)


# ---------------------------------------------------------------------------
# Running
# ---------------------------------------------------------------------------


@dataclass
class RunOutcome:
    trajectories: dict
    status: dict
    errors: dict

    @property
    def ok(self) -> bool:
        return not self.errors


def _schemes(cfg: RunConfig):
    return ("fixedpoint", "direct") if cfg.scheme == "both" else (cfg.scheme,)


def run_scheme(cfg: RunConfig, scheme: str, spec: Optional[ProblemSpec] = None):
    """One scheme; returns ``(trajectory or None, status, error message)``."""
    spec = build_spec(cfg) if spec is None else spec
    sp = cfg.step_params()
    try:
        if scheme == "fixedpoint":
            traj = continue_solution(spec, sp, cfg.tol_fp, cfg.n, cfg.window, cfg.max_iter,
                                     cfg.stride, cfg.strict,
                                     max_window=None if cfg.max_window == math.inf else cfg.max_window)
        else:
            traj = direct_run(spec, sp, cfg.n, cfg.stride, cfg.strict)
        return traj, "ok", None
    except BoundViolation as exc:
        return exc.trajectory, "bound-violation", str(exc)
    except (WindowUnderflow, WindowRejected) as exc:
        return None, "window-underflow", str(exc)


def run_config(cfg: RunConfig) -> RunOutcome:
    spec = build_spec(cfg)
    trajs, status, errors = {}, {}, {}
    for s in _schemes(cfg):
        traj, st, err = run_scheme(cfg, s, spec)
        status[s] = st
        if traj is not None:
            trajs[s] = traj
        if err:
            errors[s] = err
    return RunOutcome(trajs, status, errors)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def fmt(x) -> str:
    return format(float(x), ".17g")


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([c if isinstance(c, str) else fmt(c) for c in r])
    return buf.getvalue()


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _aligned(a: np.ndarray, b: np.ndarray):
    """Rows of ``b`` at the times of ``a`` (exact match or linear interpolation)."""
    if len(a) == len(b) and np.allclose(a[:, 0], b[:, 0], rtol=0, atol=1e-9):
        return b
    out = np.empty_like(a)
    out[:, 0] = a[:, 0]
    for j in range(1, 5):
        out[:, j] = np.interp(a[:, 0], b[:, 0], b[:, j])
    return out


def fronts_table(trajs: dict):
    names = list(trajs)
    if len(names) == 1:
        return ["t", "g", "h", "gdot", "hdot"], trajs[names[0]].fronts.tolist()
    a = trajs["fixedpoint"].fronts
    b = _aligned(a, trajs["direct"].fronts)
    header = ["t"] + [f"{s}_{c}" for s in ("fixedpoint", "direct") for c in ("g", "h", "gdot", "hdot")]
    header += ["absdiff_g", "absdiff_h"]
    rows = np.column_stack([a, b[:, 1:], np.abs(a[:, 1] - b[:, 1]), np.abs(a[:, 2] - b[:, 2])])
    return header, rows.tolist()


def snapshot_rows(trajs: dict):
    rows = []
    for name, traj in trajs.items():
        for s in traj.snapshots:
            for y, x, u, v in zip(s.y, s.x, s.u, s.v):
                rows.append([name, s.t, y, x, u, v])
    return ["scheme", "t", "y", "x", "u", "v"], rows


def scheme_differences(trajs: dict) -> Optional[dict]:
    """Sup differences of ``(u, v, g, h)`` between the schemes at common snapshot times."""
    if not {"fixedpoint", "direct"} <= set(trajs):
        return None
    a, b = trajs["fixedpoint"], trajs["direct"]
    du = dv = 0.0
    for s in a.snapshots:
        try:
            o = b.snapshot_at(s.t, 1e-9)
        except KeyError:
            continue
        du = max(du, float(np.max(np.abs(s.u - o.u))))
        dv = max(dv, float(np.max(np.abs(s.v - o.v))))
    fa = a.fronts
    fb = _aligned(fa, b.fronts)
    return {"u": du, "v": dv, "g": float(np.max(np.abs(fa[:, 1] - fb[:, 1]))),
            "h": float(np.max(np.abs(fa[:, 2] - fb[:, 2])))}


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def scheme_report(spec: ProblemSpec, traj: Trajectory) -> dict:
    rep = {k: traj.meta.get(k) for k in ("clipped_u", "clipped_v", "hopf_violations", "windows",
                                         "u_points", "tol_fp") if k in traj.meta}
    try:
        rep["ledger"] = build_ledger(spec, traj).to_dict()
    except (ValueError, ModelError) as exc:
        rep["ledger"] = {"error": str(exc)}
    rep["bound_report"] = traj.meta.get("bound_report") or \
        check_solution(traj, bound_inputs(spec)).to_dict()
    rep["final"] = dict(zip(("t", "g", "h", "gdot", "hdot"), traj.front_rows[-1]))
    return rep


def write_outputs(cfg: RunConfig, outcome: RunOutcome, audits: Optional[dict] = None) -> str:
    os.makedirs(cfg.output, exist_ok=True)
    spec = build_spec(cfg)
    trajs = outcome.trajectories
    if trajs:
        header, rows = fronts_table(trajs)
        _write(os.path.join(cfg.output, "fronts.csv"), _csv_text(header, rows))
        header, rows = snapshot_rows(trajs)
        _write(os.path.join(cfg.output, "snapshots.csv"), _csv_text(header, rows))
    report = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg.to_dict(),
        "status": outcome.status,
        "errors": outcome.errors,
        "schemes": {name: scheme_report(spec, t) for name, t in trajs.items()},
        "scheme_differences": scheme_differences(trajs),
        "audits": audits,
    }
    _write(os.path.join(cfg.output, "report.json"),
           json.dumps(_clean(report), indent=2, sort_keys=True) + "\n")
    return cfg.output


# ---------------------------------------------------------------------------
# Invariant suite
# ---------------------------------------------------------------------------


def f2_vanishes(spec: ProblemSpec) -> bool:
    U, V = np.meshgrid(np.linspace(0, 3, 9), np.linspace(0, 3, 9), indexing="ij")
    return bool(np.all(eval_reactions(spec.reactions, 0.0, 0.0, U, V)[1] == 0))


def conserved_quantity(spec: ProblemSpec, snap) -> float:
    """``int v dx + (d / mu)(h - g)``."""
    return float(trapezoid(snap.v, snap.x) + spec.d / spec.mu * (snap.h - snap.g))


def audit_trajectory(spec: ProblemSpec, traj: Trajectory, inputs=None) -> dict:
    """Invariant checks for one trajectory: ``{name: (passed, detail)}``."""
    out = {}
    umin = min(float(s.u.min()) for s in traj.snapshots)
    vmin = min(float(s.v.min()) for s in traj.snapshots)
    out["positivity"] = (umin >= -1e-12 and vmin >= -1e-12, f"min u={umin:.3g}, min v={vmin:.3g}")
    ends = max(max(abs(s.u[0]), abs(s.u[-1]), abs(s.v[0]), abs(s.v[-1])) for s in traj.snapshots)
    out["endpoint_zeros"] = (ends == 0.0, f"max endpoint value {ends:.3g}")
    clip = float(traj.meta.get("clipped_v", 0.0))
    out["clip_mass"] = (clip <= CLIP_LIMIT, f"clipped v mass {clip:.3g}")
    report = check_solution(traj, inputs)
    mono = [v for v in report.violations if v["quantity"] in
            ("h_monotone", "g_monotone", "hdot_sign", "gdot_sign")]
    out["monotone_fronts"] = (not mono, f"{len(mono)} violations")
    caps = [v for v in report.violations if v["quantity"] in ("u", "v", "hdot", "-gdot")]
    out["bound_audit"] = (not caps, f"{len(caps)} violations ({report.theorem})")
    if spec.symmetric:
        F = traj.fronts
        asym = float(np.max(np.abs(F[:, 1] + F[:, 2])))
        out["symmetry"] = (asym <= 1e-8, f"max |g+h|={asym:.3g}")
    if f2_vanishes(spec) and spec.mu == spec.beta and not traj.meta.get("lock_fronts"):
        q0 = conserved_quantity(spec, traj.snapshots[0])
        q1 = conserved_quantity(spec, traj.snapshots[-1])
        drift = abs(q1 - q0) / abs(q0)
        out["conservation"] = (drift <= 1e-3, f"relative drift {drift:.3g}")
    return out


def inject_faults(traj: Trajectory, seed: int) -> Trajectory:
    """Corrupted copy used by the self-test: every audit should then fail."""
    bad = copy.deepcopy(traj)
    rng = np.random.default_rng(seed)
    s = bad.snapshots[-1]
    i = int(rng.integers(1, len(s.u) - 1))
    s.u[i] = -1.0
    s.v[0] = 1e-3
    s.v[i] = 1e6
    bad.meta["clipped_v"] = 1.0
    k = int(rng.integers(2, max(3, len(bad.front_rows))))
    k = min(k, len(bad.front_rows) - 1)
    t, g, h, gd, hd = bad.front_rows[k]
    bad.front_rows[k] = (t, g + 0.5, h - 0.25, 1.0, 1e6)
    return bad


def print_table(rows, stream=None):
    stream = sys.stdout if stream is None else stream
    width = max(len(r[0]) for r in rows) if rows else 10
    for name, passed, detail in rows:
        stream.write(f"{name:<{width}}  {'PASS' if passed else 'FAIL'}  {detail}\n")


# ---------------------------------------------------------------------------
# Convergence study
# ---------------------------------------------------------------------------


def refine_levels(cfg: RunConfig, levels: int, mode: str):
    """``(n, dt)`` per level, coarsest first."""
    if levels < 3:
        raise ConfigError(f"levels={levels}: must be >= 3")
    if mode not in REFINE_MODES:
        raise ConfigError(f"refine={mode!r}: must be one of {', '.join(REFINE_MODES)}")
    out = []
    for k in range(levels):
        n = cfg.n if mode == "time" else (cfg.n - 1) * 2**k + 1
        fac = {"time": 2**k, "space": 1, "both": 2**k, "parabolic": 4**k}[mode]
        out.append((n, cfg.dt / fac))
    return out


def observed_orders(errors):
    """``log2`` ratios of consecutive errors; ``'exact'`` when errors vanish."""
    orders = []
    for e0, e1 in zip(errors[:-1], errors[1:]):
        if e0 == 0 and e1 == 0:
            orders.append("exact")
        elif e1 == 0 or e0 == 0:
            orders.append(math.nan)
        else:
            orders.append(math.log2(e0 / e1))
    return orders


def converge(cfg: RunConfig, levels: int = 3, mode: str = "time", scheme: Optional[str] = None):
    """Runs at ``levels`` resolutions plus a finer reference; returns table rows and flags."""
    scheme = scheme or ("fixedpoint" if cfg.scheme == "both" else cfg.scheme)
    grid = refine_levels(cfg, levels + 1, mode)
    spec = build_spec(cfg)
    finals = []
    for n, dt in grid:
        c = copy.deepcopy(cfg)
        c.n, c.dt, c.stride = n, dt, 10**9
        traj, status, err = run_scheme(c, scheme, spec)
        if traj is None:
            raise RuntimeError(f"level n={n}, dt={dt:g} failed: {err}")
        s = traj.snapshots[-1]
        finals.append((n, dt, s))
    ref_n, _, ref = finals[-1]
    errs = {"u": [], "v": [], "h": []}
    for n, _, s in finals[:-1]:
        step = (ref_n - 1) // (n - 1)
        errs["u"].append(float(np.max(np.abs(s.u - ref.u[::step]))))
        errs["v"].append(float(np.max(np.abs(s.v - ref.v[::step]))))
        errs["h"].append(abs(s.h - ref.h))
    rows, flags = [], []
    for q in ("v", "u", "h"):
        orders = observed_orders(errs[q])
        for k, (n, dt, _) in enumerate(finals[:-1]):
            rows.append([scheme, q, n, dt, errs[q][k], orders[k - 1] if k else ""])
        if any(e1 > e0 for e0, e1 in zip(errs[q][:-1], errs[q][1:])):
            flags.append(f"non-monotone error decay in {q}")
    return rows, flags


def _order_cell(o):
    if isinstance(o, str):
        return o
    return fmt(o)


# ---------------------------------------------------------------------------
# Sweep
# ---------------------------------------------------------------------------


def _set_path(raw: dict, dotted: str, value):
    keys = dotted.split(".")
    cur = raw
    for k in keys[:-1]:
        cur = cur.setdefault(k, {})
    cur[keys[-1]] = value


def _sweep_one(job):
    idx, raw = job
    try:
        cfg = validate_config(raw)
        outcome = run_config(cfg)
        write_outputs(cfg, outcome)
        final = {s: t.front_rows[-1] for s, t in outcome.trajectories.items()}
        return idx, "ok" if outcome.ok else ";".join(outcome.status.values()), final
    except ConfigError as exc:
        return idx, f"config-error: {exc}", {}


def sweep_jobs(raw: dict, grid: dict):
    names = sorted(grid)
    jobs = []
    for idx, combo in enumerate(itertools.product(*(grid[k] for k in names))):
        r = copy.deepcopy(raw)
        for k, v in zip(names, combo):
            _set_path(r, k, v)
        r["output"] = os.path.join(raw.get("output", "out"), f"run_{idx:03d}")
        jobs.append((idx, r, dict(zip(names, combo))))
    return jobs


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def _overrides(args) -> dict:
    out = {}
    for key in ("model", "h0", "d", "mu", "beta", "t_final", "n", "dt", "theta", "scheme",
                "tol_fp", "window", "stride", "output", "seed"):
        val = getattr(args, key, None)
        if val is not None:
            out[key] = val
    if getattr(args, "strict", False):
        out["strict"] = True
    if getattr(args, "lock_fronts", False):
        out["lock_fronts"] = True
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError(f"--set {item!r}: expected key=value")
        k, v = item.split("=", 1)
        _set_path(out, k.strip(), _parse_value(v.strip()))
    return out


def load_raw(args) -> dict:
    raw = {}
    if args.config:
        with open(args.config, "rb") as fh:
            try:
                raw = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"{args.config}: not well-formed TOML: {exc}") from exc
    for k, v in _overrides(args).items():
        if isinstance(v, dict) and isinstance(raw.get(k), dict):
            raw[k] = {**raw[k], **v}
        else:
            raw[k] = v
    return raw


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="freebound", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", nargs="?", help="TOML config file")
        sp.add_argument("--model")
        sp.add_argument("--h0", type=float)
        sp.add_argument("--d", type=float)
        sp.add_argument("--mu", type=float)
        sp.add_argument("--beta", type=float)
        sp.add_argument("--t-final", dest="t_final", type=float)
        sp.add_argument("--n", type=int)
        sp.add_argument("--dt", type=float)
        sp.add_argument("--theta", type=float)
        sp.add_argument("--scheme", choices=SCHEMES)
        sp.add_argument("--tol-fp", dest="tol_fp", type=float)
        sp.add_argument("--window", type=float)
        sp.add_argument("--stride", type=int)
        sp.add_argument("--output", "-o")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--strict", action="store_true")
        sp.add_argument("--lock-fronts", action="store_true")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override any key, dotted for tables (params.gamma=0.5)")
        return sp

    common(sub.add_parser("run", help="solve and write outputs"))
    common(sub.add_parser("compare", help="run both schemes and print sup differences"))
    c = common(sub.add_parser("converge", help="refinement study"))
    c.add_argument("--levels", type=int, default=3)
    c.add_argument("--refine", choices=REFINE_MODES, default="time")
    v = common(sub.add_parser("verify", help="invariant suite"))
    v.add_argument("--self-test", action="store_true",
                   help="corrupt the trajectories and check that the audits catch it")
    s = common(sub.add_parser("sweep", help="parameter grid"))
    s.add_argument("--vary", action="append", default=[], metavar="KEY=V1,V2,...")
    s.add_argument("--workers", type=int, default=None)
    return p


def cmd_run(cfg: RunConfig) -> int:
    outcome = run_config(cfg)
    write_outputs(cfg, outcome)
    for s, st in outcome.status.items():
        print(f"{s}: {st}")
    if any(st == "window-underflow" for st in outcome.status.values()):
        return EXIT_UNDERFLOW
    return EXIT_OK if outcome.ok else EXIT_FAIL


def cmd_compare(cfg: RunConfig) -> int:
    cfg.scheme = "both"
    outcome = run_config(cfg)
    write_outputs(cfg, outcome)
    diff = scheme_differences(outcome.trajectories)
    if diff is None:
        print("comparison unavailable: " + "; ".join(outcome.errors.values()))
        return EXIT_FAIL
    for k, val in diff.items():
        print(f"sup |{k}_fixedpoint - {k}_direct| = {fmt(val)}")
    return EXIT_OK if outcome.ok else EXIT_FAIL


def cmd_converge(cfg: RunConfig, levels: int, mode: str) -> int:
    rows, flags = converge(cfg, levels, mode)
    os.makedirs(cfg.output, exist_ok=True)
    text = _csv_text(["scheme", "quantity", "n", "dt", "error", "order"],
                     [[r[0], r[1], str(r[2]), r[3], r[4], _order_cell(r[5]) if r[5] != "" else ""]
                      for r in rows])
    _write(os.path.join(cfg.output, "orders.csv"), text)
    sys.stdout.write(text)
    for f in flags:
        print(f"warning: {f}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, self_test: bool) -> int:
    cfg.scheme = "both"
    spec = build_spec(cfg)
    outcome = run_config(cfg)
    inputs = bound_inputs(spec)
    rows = []
    audits = {}
    for name in ("fixedpoint", "direct"):
        if name not in outcome.trajectories:
            rows.append((f"{name}:run", False, outcome.errors.get(name, "no trajectory")))
            continue
        traj = outcome.trajectories[name]
        if self_test:
            traj = inject_faults(traj, cfg.seed)
        res = audit_trajectory(spec, traj, inputs)
        audits[name] = {k: {"passed": p, "detail": d} for k, (p, d) in res.items()}
        rows.extend((f"{name}:{k}", p, d) for k, (p, d) in res.items())
    if self_test:
        # the self-test passes when every corrupted audit is caught
        caught = [(n, not p, d) for n, p, d in rows]
        print_table([(n, c, ("caught: " if c else "missed: ") + d) for n, c, d in caught])
        return EXIT_OK if all(c for _, c, _ in caught) else EXIT_FAIL
    write_outputs(cfg, outcome, audits)
    print_table(rows)
    return EXIT_OK if all(p for _, p, _ in rows) else EXIT_FAIL


def cmd_sweep(raw: dict, vary, workers) -> int:
    grid = {}
    for item in vary:
        if "=" not in item:
            raise ConfigError(f"--vary {item!r}: expected key=v1,v2,...")
        k, vals = item.split("=", 1)
        grid[k.strip()] = [_parse_value(v.strip()) for v in vals.split(",")]
    if not grid:
        raise ConfigError("sweep needs at least one --vary key=v1,v2,...")
    jobs = sweep_jobs(raw, grid)
    validate_config(jobs[0][1])
    with ProcessPoolExecutor(max_workers=workers) as pool:
        results = sorted(pool.map(_sweep_one, [(i, r) for i, r, _ in jobs]))
    names = sorted(grid)
    rows = []
    for (idx, status, final), (_, _, combo) in zip(results, jobs):
        for scheme, row in sorted(final.items()) or [("-", (math.nan,) * 5)]:
            rows.append([f"run_{idx:03d}"] + [str(combo[k]) for k in names]
                        + [scheme, status] + list(row))
    out = raw.get("output", "out")
    os.makedirs(out, exist_ok=True)
    text = _csv_text(["run"] + names + ["scheme", "status", "t", "g", "h", "gdot", "hdot"], rows)
    _write(os.path.join(out, "sweep.csv"), text)
    sys.stdout.write(text)
    return EXIT_OK if all(r[1] == "ok" for r in results) else EXIT_FAIL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        raw = load_raw(args)
        if args.command == "sweep":
            return cmd_sweep(raw, args.vary, args.workers)
        cfg = validate_config(raw)
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "compare":
            return cmd_compare(cfg)
        if args.command == "converge":
            return cmd_converge(cfg, args.levels, args.refine)
        return cmd_verify(cfg, args.self_test)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
