"""Configuration-driven experiments with reproducible on-disk artifacts.

A run writes ``run.csv`` (one diagnostics row per accepted t), ``states/*.json``
snapshots at up to ``checkpoints`` log-spaced times, ``config.json`` (the
resolved configuration) and ``report.json`` (assertions with the claim each
one tests). Outputs contain no timestamps, so reruns are byte-identical.
"""

from __future__ import annotations

import copy
import json
import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from . import estimates as est
from . import model
from .fields import HermitianField
from .identities import verify_identities
from .solver import (ScalarProblem, SolverConfig, SphereBackend,
                     TorusBackend, continue_in_t, normalization_constant, t_schedule)

log = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "HERMCONT_OUTPUT_ROOT"

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_SINGULAR = 3
EXIT_ASSERTION = 4

BACKENDS = ("torus-spectral", "sphere-symmetric", "ot-explicit", "ot-stretched", "identity-fuzz")
SPACINGS = ("log", "linear")
PHI0_PRESETS = ("zero", "cosine")
MAX_CHECKPOINTS = 20


class ConfigError(ValueError):
    """Validation failure naming the offending field (and line, when known)."""

    def __init__(self, field: str, message: str, line: int | None = None, source: str | None = None):
        self.field, self.line, self.source = field, line, source
        where = f"{source}:{line}: " if (source and line) else (f"line {line}: " if line else "")
        super().__init__(f"{where}{field}: {message}")


# -- presets ----------------------------------------------------------------------

PRESETS: dict = {
    "torus-flat": {
        "name": "torus-flat", "backend": "torus-spectral", "variant": "normalized", "n": 1,
        "grid": 64, "phi0": "zero",
        "t_schedule": {"start": 0.0, "end": 1000.0, "count": 25, "spacing": "log"},
        "description": "flat torus with φ₀ = 0; the flat metric solves the equation for all t",
    },
    "torus-perturbed": {
        "name": "torus-perturbed", "backend": "torus-spectral", "variant": "normalized", "n": 2,
        "grid": 64, "phi0": "cosine", "refine": True,
        "t_schedule": {"start": 0.0, "end": 1000.0, "count": 25, "spacing": "log"},
        "description": "long-time run on a flat torus from a perturbed initial metric (set n: 1 for the curve case)",
    },
    "sphere-blowup": {
        "name": "sphere-blowup", "backend": "sphere-symmetric", "variant": "unnormalized", "n": 1,
        "grid": 256, "profile": [1.0],
        "t_schedule": {"start": 0.05, "end": 1.2, "count": 24, "spacing": "linear"},
        "description": "round sphere with Ric ω₀ = ω₀; ω(t) = (1 - t)ω₀ until T = 1",
    },
    "sphere-perturbed": {
        "name": "sphere-perturbed", "backend": "sphere-symmetric", "variant": "unnormalized", "n": 1,
        "grid": 256, "profile": [1.0, 0.3, 0.2],
        "t_schedule": {"start": 0.05, "end": 1.2, "count": 24, "spacing": "linear"},
        "description": "non-round rotationally symmetric sphere; curvature still blows up at T",
    },
    "ot-explicit-family": {
        "name": "ot-explicit-family", "backend": "ot-explicit", "variant": "normalized", "n": 2,
        "samples": 100, "seed": 0,
        "t_schedule": {"start": 0.0, "end": 1000.0, "count": 20, "spacing": "log"},
        "description": "closed-form normalized solution (ω̂₀ + tα)/(t+1) from the OT metric",
    },
    "ot-stretched-calabi": {
        "name": "ot-stretched-calabi", "backend": "ot-stretched", "variant": "normalized", "n": 2,
        "samples": 100, "seed": 0,
        "t_schedule": {"start": 1.0, "end": 1000.0, "count": 20, "spacing": "log"},
        "description": "Calabi quantity of the leaf-stretched explicit family against the Euclidean metric",
    },
    "identity-fuzz": {
        "name": "identity-fuzz", "backend": "identity-fuzz", "n": 2, "samples": 100, "seed": 0,
        "description": "randomized tensor, Cherrier and model identity suites",
    },
}

DEFAULTS = {
    "variant": "normalized", "n": 2, "grid": 64, "phi0": "zero", "profile": [1.0], "scale": 1.0,
    "t_schedule": {"start": 0.0, "end": 1000.0, "count": 25, "spacing": "log"},
    "tolerances": {"newton_tol": 1e-10, "max_newton": 30, "damping": 0.5, "bisect_rtol": 1e-3},
    "seed": 0, "samples": 100, "checkpoints": MAX_CHECKPOINTS, "refine": False, "output": None,
    "description": "",
}

KNOWN_KEYS = set(DEFAULTS) | {"name", "backend"}


def catalog() -> list:
    return [{"name": k, "backend": v["backend"], "description": v["description"]}
            for k, v in PRESETS.items()]


# -- loading and validation -------------------------------------------------------

def _line_map(text: str) -> dict:
    """Map dotted key paths to 1-based line numbers in YAML/JSON text."""
    out = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return out

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                path = f"{prefix}.{k.value}" if prefix else str(k.value)
                out[path] = k.start_mark.line + 1
                walk(v, path)

    walk(root, "")
    return out


def load_config_text(text: str, source: str | None = None) -> dict:
    try:
        data = yaml.safe_load(text)      # JSON is a subset of YAML
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError("<document>", f"parse error: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark else None, source) from None
    if not isinstance(data, dict):
        raise ConfigError("<document>", "top level must be a mapping", 1, source)
    return validate_config(data, _line_map(text), source)


def load_config(path_or_preset: str) -> dict:
    if path_or_preset in PRESETS and not Path(path_or_preset).exists():
        return validate_config(copy.deepcopy(PRESETS[path_or_preset]))
    p = Path(path_or_preset)
    if not p.exists():
        raise ConfigError("<document>", f"no such config file or preset: {path_or_preset}")
    return load_config_text(p.read_text(), str(p))


def validate_config(data: dict, lines: dict | None = None, source: str | None = None) -> dict:
    """Resolve defaults and check every field; raises :class:`ConfigError`."""
    lines = lines or {}

    def fail(field, msg):
        raise ConfigError(field, msg, lines.get(field), source)

    for key in data:
        if key not in KNOWN_KEYS:
            fail(str(key), "unknown field")
    cfg = copy.deepcopy(DEFAULTS)
    for k, v in data.items():
        if isinstance(v, dict) and isinstance(cfg.get(k), dict):
            for kk in v:
                if kk not in cfg[k]:
                    fail(f"{k}.{kk}", "unknown field")
            cfg[k] = {**cfg[k], **v}
        else:
            cfg[k] = copy.deepcopy(v)

    if not isinstance(cfg.get("name"), str) or not cfg["name"]:
        fail("name", "required non-empty string")
    if cfg.get("backend") not in BACKENDS:
        fail("backend", f"must be one of {list(BACKENDS)}")
    be = cfg["backend"]

    def integer(field, value, lo):
        if isinstance(value, bool) or not isinstance(value, int) or value < lo:
            fail(field, f"must be an integer >= {lo}")

    def number(field, value, positive=True):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            fail(field, "must be a finite number")
        if positive and value <= 0:
            fail(field, "must be positive")

    integer("n", cfg["n"], 1)
    integer("seed", cfg["seed"], 0)
    integer("samples", cfg["samples"], 1)
    integer("checkpoints", cfg["checkpoints"], 0)
    if cfg["checkpoints"] > MAX_CHECKPOINTS:
        fail("checkpoints", f"at most {MAX_CHECKPOINTS}")
    if not isinstance(cfg["refine"], bool):
        fail("refine", "must be true or false")
    if cfg["variant"] not in ("normalized", "unnormalized"):
        fail("variant", "must be 'normalized' or 'unnormalized'")
    if cfg["output"] is not None and not isinstance(cfg["output"], str):
        fail("output", "must be a string path")

    tol = cfg["tolerances"]
    number("tolerances.newton_tol", tol["newton_tol"])
    integer("tolerances.max_newton", tol["max_newton"], 1)
    number("tolerances.damping", tol["damping"])
    if not tol["damping"] < 1:
        fail("tolerances.damping", "must lie in (0, 1)")
    number("tolerances.bisect_rtol", tol["bisect_rtol"])

    if be != "identity-fuzz":
        ts = cfg["t_schedule"]
        number("t_schedule.start", ts["start"], positive=False)
        number("t_schedule.end", ts["end"], positive=False)
        integer("t_schedule.count", ts["count"], 1)
        if ts["spacing"] not in SPACINGS:
            fail("t_schedule.spacing", f"must be one of {list(SPACINGS)}")
        if ts["start"] < 0:
            fail("t_schedule.start", "must be >= 0")
        if ts["count"] > 1 and ts["end"] <= ts["start"]:
            fail("t_schedule.end", "t_schedule must be increasing (end must exceed start)")
        if ts["spacing"] == "log" and ts["count"] > 1 and ts["start"] == 0 and ts["end"] <= 1e-3:
            fail("t_schedule.end", "log spacing from 0 needs end > 1e-3")

    if be == "torus-spectral":
        if cfg["n"] not in (1, 2):
            fail("n", "the torus backend supports n = 1 or 2")
        integer("grid", cfg["grid"], 8)
        _validate_phi0(cfg["phi0"], cfg["n"], fail)
    elif be == "sphere-symmetric":
        if cfg["n"] != 1:
            fail("n", "the sphere backend has n = 1")
        if cfg["variant"] != "unnormalized":
            fail("variant", "the sphere backend implements the unnormalized equation")
        integer("grid", cfg["grid"], 8)
        prof = cfg["profile"]
        if not isinstance(prof, list) or not prof or not all(
                isinstance(c, (int, float)) and not isinstance(c, bool) for c in prof):
            fail("profile", "must be a non-empty list of polynomial coefficients of ρ = m'")
        number("scale", cfg["scale"])
        x = np.linspace(-1, 1, 2001)
        if np.any(cfg["scale"] * np.polynomial.polynomial.polyval(x, prof) <= 0):
            fail("profile", "momentum profile must be strictly increasing (ρ > 0 on [-1, 1])")
    elif be in ("ot-explicit", "ot-stretched"):
        if cfg["n"] < 2:
            fail("n", "the OT model needs n >= 2")
        if cfg["variant"] != "normalized":
            fail("variant", "the explicit OT family solves the normalized equation")
        if be == "ot-stretched" and cfg["t_schedule"]["start"] < 1:
            fail("t_schedule.start", "the stretched Calabi sweep starts at t >= 1")
    return cfg


def _validate_phi0(phi0, n, fail):
    if isinstance(phi0, str):
        if phi0 not in PHI0_PRESETS:
            fail("phi0", f"preset must be one of {list(PHI0_PRESETS)}")
        return
    if not isinstance(phi0, list):
        fail("phi0", "must be a preset name or a list of modes [k_1, .., k_n, a_cos, a_sin]")
    for i, mode in enumerate(phi0):
        if (not isinstance(mode, list) or len(mode) != n + 2
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in mode)):
            fail(f"phi0[{i}]", f"mode must be a list of {n + 2} numbers [k_1, .., k_n, a_cos, a_sin]")
        if any(float(k) != int(k) for k in mode[:n]):
            fail(f"phi0[{i}]", "wave numbers must be integers (periodicity)")


def phi0_modes(value, n: int) -> list:
    if value == "zero":
        return []
    if value == "cosine":
        # n = 1: ω₀ = 1 + 0.3 cos x; n = 2: a two-mode perturbation
        return [[1, -1.2, 0.0]] if n == 1 else [[1, 0, -0.8, 0.0], [1, 1, 0.0, -0.4]]
    return value


def phi0_function(value, n: int):
    modes = phi0_modes(value, n)

    def phi0(X):
        out = np.zeros(X.shape[0])
        for m in modes:
            k = np.asarray(m[:n], dtype=float)
            th = X @ k
            out += m[n] * np.cos(th) + m[n + 1] * np.sin(th)
        return out

    return phi0


def build_problem(cfg: dict) -> tuple:
    """ScalarProblem and SolverConfig for grid backends."""
    ts = cfg["t_schedule"]
    sched = t_schedule(ts["start"], ts["end"], ts["count"], ts["spacing"])
    tol = cfg["tolerances"]
    sc = SolverConfig(newton_tol=tol["newton_tol"], max_newton=tol["max_newton"],
                      damping=tol["damping"], bisect_rtol=tol["bisect_rtol"], t_schedule=sched)
    if cfg["backend"] == "torus-spectral":
        be = TorusBackend(cfg["n"], cfg["grid"], phi0_function(cfg["phi0"], cfg["n"]))
    else:
        be = SphereBackend(cfg["grid"], rho=cfg["profile"], scale=cfg["scale"])
    return ScalarProblem(cfg["variant"], be), sc


# -- assertions -------------------------------------------------------------------

@dataclass
class Assertion:
    name: str
    claim: str
    passed: bool
    value: Any = None
    bound: Any = None
    note: str = ""

    def to_dict(self):
        d = {"name": self.name, "claim": self.claim, "passed": bool(self.passed),
             "value": _jsonable(self.value), "bound": _jsonable(self.bound)}
        if self.note:
            d["note"] = self.note
        return d


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


CLAIMS = {
    "c0": "C0 estimate: (t+1)|φ| bounded by ‖φ₀‖ + ‖f‖",
    "det": "volume ratio estimate: t|log ωⁿ/ω̂ⁿ| bounded by 2‖φ₀‖ + ‖f‖",
    "eps": "tight equivalence (1-ε)ω̂ ≤ ω ≤ (1+ε)ω̂ with ε → 0",
    "ricci": "Ricci lower bound Ric ω ≥ -(1 + 1/t)ω",
    "contracted": "contracted equation tr_ω ω₀ = n + tR",
    "maclaurin": "trace inequalities from Maclaurin's inequality",
    "calabi": "Calabi quantity bounded under uniform equivalence",
    "T": "maximal existence time from the cohomological condition",
    "blowup": "scalar curvature blows up at a finite-time singularity",
    "explicit": "explicit solution (ω̂₀ + tα)/(t+1) of the normalized equation",
    "expansion": "polynomial expansion of the volume ratio in 1/t",
    "normalization": "normalization of the potential by the integral condition",
    "gh": "collapse of the leaves to the base torus",
    "identities": "curvature/torsion commutation and trace Laplacian identities",
    "finite": "diagnostics finite on accepted states",
    "reach": "continuation reaches the end of the schedule when T = ∞",
}


def _a(name, key, passed, value=None, bound=None, note=""):
    return Assertion(name, CLAIMS[key], bool(passed), value, bound, note)


# -- runners ----------------------------------------------------------------------

def _checkpoint_indices(times, count: int) -> list:
    if count == 0 or not times:
        return []
    times = np.asarray(times)
    pos = times[times > 0]
    idx = {0}
    if pos.size:
        targets = np.geomspace(pos.min(), pos.max(), count)
        for tg in targets:
            idx.add(int(np.argmin(np.abs(np.log(np.maximum(times, 1e-300)) - np.log(tg)))))
    return sorted(idx)[:count]


def _grid_run(cfg: dict) -> tuple:
    problem, sc = build_problem(cfg)
    result = continue_in_t(problem, sc)
    rows = [est.diagnostics_row(s, problem) for s in result.states]
    if cfg["backend"] == "torus-spectral":
        asserts, summary = _torus_assertions(cfg, problem, result, rows)
    else:
        asserts, summary = _sphere_assertions(cfg, problem, result, rows)
    asserts.insert(0, _a("rows_finite", "finite", all(r.is_finite() for r in rows)))
    states = [result.states[i] for i in _checkpoint_indices(list(result.times), cfg["checkpoints"])]
    return rows, asserts, summary, states, result


def _torus_assertions(cfg, problem, result, rows):
    be = problem.backend
    out = [_a("reaches_schedule_end", "reach", result.completed,
              value=float(result.states[-1].t) if result.states else None,
              bound=float(cfg["t_schedule"]["end"]))]
    contracted = [est.contracted_scalar_identity(s, problem) for s in result.states]
    worst = max(contracted, default=0.0)
    out.append(_a("contracted_identity", "contracted", worst < 1e-5, worst, 1e-5))
    mac = min((est.maclaurin_checks(s.omega.values, be.comparison_metric(s.t, problem.variant)).min
               for s in result.states), default=0.0)
    out.append(_a("maclaurin", "maclaurin", mac >= -1e-10, mac, -1e-10))
    late = [r for r in rows if r.t >= 1]
    phi0_norm = float(np.max(np.abs(be.phi0)))
    summary = {"phi0_sup": phi0_norm, "states": len(result.states)}
    if problem.variant == "normalized" and late:
        c0 = max(r.sup_abs_phi_scaled for r in late)
        det = max(r.det_log_ratio_scaled for r in late)
        out.append(_a("c0_bound", "c0", c0 <= phi0_norm + 1e-6, c0, phi0_norm + 1e-6))
        out.append(_a("det_bound", "det", det <= 2 * phi0_norm + 1e-6, det, 2 * phi0_norm + 1e-6))
        rmin = min(r.ricci_min + (1 + 1 / r.t) for r in late)
        out.append(_a("ricci_lower_bound", "ricci", rmin >= -1e-8, rmin, -1e-8,
                      "minimum of ricci_min + (1 + 1/t) over t >= 1"))
        norm = max((normalization_constant(s, problem) for s in result.states if s.t > 0), default=0.0)
        out.append(_a("normalization", "normalization", norm < 1e-10, norm, 1e-10))
        eps = [(r.t, r.equivalence_eps) for r in late]
        if max(e for _, e in eps) < 1e-12:
            out.append(_a("equivalence_decay", "eps", True, 0.0, 0.0, "ω = ω̂ throughout"))
        else:
            slope = est.log_slope(*zip(*eps))
            out.append(_a("equivalence_decay", "eps", slope < 0, slope, 0.0,
                          "least-squares slope of log ε against log t; rate not asserted"))
            summary["eps_rate"] = slope
    calabi = max(r.calabi_sup for r in late) if late else 0.0
    summary["calabi_sup"] = calabi
    summary["ricci_max"] = max((r.ricci_max for r in late), default=0.0)
    half = [r.calabi_sup for r in late if r.t <= math.sqrt(cfg["t_schedule"]["end"])]
    if late and half:
        rel = abs(calabi - max(half)) / max(calabi, 1e-300) if calabi > 1e-14 else 0.0
        out.append(_a("calabi_sweep_length", "calabi", math.isfinite(calabi) and rel < 0.05, rel, 0.05,
                      "relative change of sup S when the sweep is shortened to t <= sqrt(end)"))
    if cfg["refine"] and late:
        fine_cfg = {**cfg, "grid": 2 * cfg["grid"], "refine": False}
        fp, fsc = build_problem(fine_cfg)
        fres = continue_in_t(fp, fsc)
        fine = max(est.diagnostics_row(s, fp).calabi_sup for s in fres.states if s.t >= 1)
        rel = abs(fine - calabi) / max(calabi, 1e-300) if calabi > 1e-14 else abs(fine)
        out.append(_a("calabi_grid_refinement", "calabi", rel < 0.05, rel, 0.05,
                      "relative change of sup S from N to 2N"))
        summary["calabi_sup_refined"] = fine
    return out, summary


def _sphere_assertions(cfg, problem, result, rows):
    be = problem.backend
    T = be.maximal_time()
    summary = {"maximal_time": T, "empirical_failure_time": result.failure_time,
               "failure_reason": result.failure_reason, "states": len(result.states)}
    out = []
    t_fail = result.failure_time
    out.append(_a("failure_not_beyond_T", "T", t_fail is not None and t_fail <= T * (1 + 1e-3),
                  t_fail, T))
    fit = est.blowup_profile([r.t for r in rows], [r.scalar_R_sup for r in rows])
    summary.update({"fit_a": fit.a, "fit_T": fit.T_fit})
    ok = fit.sufficient and abs(fit.T_fit - T) <= 0.02 * T
    out.append(_a("blowup_fit_T", "blowup", ok, fit.T_fit, T, "fitted T within 2% of quadrature T"))
    R = [r.scalar_R_sup for r in rows]
    out.append(_a("curvature_diverges", "blowup", len(R) > 2 and R[-1] > 10 * R[0], R[-1] if R else None,
                  10 * R[0] if R else None, "last sup R exceeds ten times the first"))
    early = [s for s in result.states if s.t <= 0.9 * T]
    absolute = [est.contracted_scalar_identity(s, problem) for s in early]
    size = [float(np.max(be.rho / s.omega.values[:, 0, 0].real)) for s in early]
    rel = max((a / b for a, b in zip(absolute, size)), default=0.0)
    summary["contracted_identity_abs"] = max(absolute, default=0.0)
    out.append(_a("contracted_identity", "contracted", rel < 1e-5, rel, 1e-5,
                  "relative to sup tr_ω ω₀, states with t <= 0.9 T; the rounding floor of the "
                  "residual is amplified by the second-difference operator as ω shrinks"))
    if len(set(cfg["profile"][1:]) - {0, 0.0}) == 0:
        rel = max(np.max(np.abs(s.omega.values[:, 0, 0].real / (be.rho * (1 - s.t)) - 1))
                  for s in result.states if s.t <= 0.99)
        out.append(_a("round_closed_form", "T", rel < 1e-6, float(rel), 1e-6,
                      "ω(t) = (1 - t)ω₀ for t <= 0.99"))
        prod = [r.scalar_R_sup * (T - r.t) / T for r in rows if 0.5 <= r.t <= 0.99 * T]
        dev = max(abs(p - 1) for p in prod) if prod else math.inf
        out.append(_a("round_R_times_gap", "blowup", dev <= 0.05, dev, 0.05, "sup R (T - t) = 1 ± 5%"))
        out.append(_a("round_failure_time", "T", t_fail is not None and abs(t_fail - T) <= 0.01 * T,
                      t_fail, T, "empirical failure within 1%"))
    return out, summary


def _ot_times(cfg):
    ts = cfg["t_schedule"]
    return list(t_schedule(ts["start"], ts["end"], ts["count"], ts["spacing"]))


def _ot_explicit_run(cfg):
    n = cfg["n"]
    pts = model.sample_points(n, cfg["samples"], seed=cfg["seed"])
    fam = model.ReferenceFamily.from_metric(model.omega_ot, n, pts)
    times = _ot_times(cfg)
    eng = model.model_engine(pts)
    rows = [est.explicit_family_row(t, pts, fam, eng) for t in times]
    res = max(model.explicit_solution_residual(t, pts, fam, eng) for t in times)
    out = [_a("rows_finite", "finite", all(r.is_finite() for r in rows)),
           _a("explicit_residual", "explicit", res < 1e-6, res, 1e-6)]
    late = [t for t in times if t >= 1]
    Z = pts.points
    f = fam.f_coeffs(Z)
    out.append(_a("f_nonnegative", "expansion", float(f.min()) >= 0, float(f.min()), 0.0))
    oracle = _wedge_oracle(fam.hat_omega0(Z), model.alpha(Z))
    fast = model.binomial_wedges(fam.hat_omega0(Z), model.alpha(Z))
    werr = float(np.max(np.abs(fast - oracle)))
    exp_err = max((model.expansion_coefficients(t, pts, fam).max_abs_error for t in late), default=0.0)
    out.append(_a("wedge_oracle", "expansion", werr < 1e-9, werr, 1e-9))
    out.append(_a("expansion_identity", "expansion", exp_err < 1e-9, exp_err, 1e-9))
    gap = min((float(model.expansion_coefficients(t, pts, fam).log_bound_gap.min()) for t in late), default=0.0)
    out.append(_a("expansion_log_bound", "expansion", gap >= -1e-12, gap, 0.0, "f₁ + ... - t log(lhs) >= 0"))
    norm = max(model.normalization_mismatch(t, fam) for t in times if t > 0)
    out.append(_a("normalization", "normalization", norm < 1e-6, norm, 1e-6,
                  "with the normalized constant potential of the family"))
    fnorm = float(np.max(np.sum(f, axis=1)))
    lrows = [r for r in rows if r.t >= 1]
    c0 = max(r.sup_abs_phi_scaled for r in lrows)
    out.append(_a("c0_bound", "c0", c0 <= fnorm + 1e-12, c0, fnorm))
    rmin = min(r.ricci_min + (1 + 1 / r.t) for r in lrows)
    out.append(_a("ricci_lower_bound", "ricci", rmin >= -1e-8, rmin, -1e-8))
    base = rows[[r.t for r in rows].index(min(late))] if late else rows[0]
    ratios = [r.gh_proxy * math.sqrt(r.t + 1) / (base.gh_proxy * math.sqrt(base.t + 1)) for r in lrows]
    out.append(_a("gh_rate", "gh", all(0.5 <= q <= 2 for q in ratios), [min(ratios), max(ratios)], [0.5, 2],
                  "proxy·sqrt(t+1) relative to its value at the first t >= 1"))
    summary = {"ricci_max": max(r.ricci_max for r in lrows), "f_sup": fnorm, "c": fam.c,
               "samples": cfg["samples"], "gh_base_constant": est.gh_base_constant(times[-1], pts, fam)}
    return rows, out, summary


def _wedge_oracle(A, B):
    n = A.shape[-1]
    return np.stack([math.comb(n, k) * model.wedge_density(*([A] * k + [B] * (n - k)))
                     for k in range(n + 1)], axis=1)


def _ot_stretched_run(cfg):
    n = cfg["n"]
    pts = model.sample_points(n, cfg["samples"], seed=cfg["seed"])
    times = _ot_times(cfg)
    eng = model.model_engine(pts)
    fine = eng.with_step(eng.step / 2)
    rows = [est.explicit_family_row(t, pts, None, eng) for t in times]
    S = [r.calabi_sup for r in rows]
    S_fine = [est.stretched_calabi_sup(t, pts, fine) for t in times]
    sup, sup_fine = max(S), max(S_fine)
    half = max(s for t, s in zip(times, S) if t <= math.sqrt(times[-1]))
    out = [_a("rows_finite", "finite", all(r.is_finite() for r in rows)),
           _a("calabi_finite", "calabi", math.isfinite(sup), sup, None),
           _a("calabi_refinement", "calabi", abs(sup_fine - sup) / sup < 0.05,
              abs(sup_fine - sup) / sup, 0.05, "finite-difference step halved"),
           _a("calabi_sweep_length", "calabi", abs(sup - half) / sup < 0.05, abs(sup - half) / sup, 0.05,
              "sup over t <= sqrt(end) against the full sweep")]
    torsion = {}
    for t in (times[0], times[-1]):
        chi = HermitianField.from_function(model.stretched_reference(t), pts)
        T0, dT = est.torsion_derivative_norms(chi, eng)
        torsion[f"t={t:g}"] = {"sup_torsion": T0, "sup_torsion_derivative": dT}
    return rows, out, {"calabi_sup": sup, "samples": cfg["samples"], "reference_torsion": torsion}


def _identity_run(cfg):
    rep = verify_identities(cfg["n"], cfg["seed"], cfg["samples"])
    out = []
    for suite, checks in rep["suites"].items():
        for name, c in checks.items():
            out.append(Assertion(f"{suite}.{name}", CLAIMS["identities"], c["passed"], c["value"], c["tol"],
                                 c.get("note", "")))
    summary = {"notice": rep.get("notice", "")} if "notice" in rep else {}
    return [], out, summary


# -- output -----------------------------------------------------------------------

def output_dir(cfg: dict) -> Path:
    root = Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))
    return root / (cfg["output"] or cfg["name"])


def _dump(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


@dataclass
class RunOutcome:
    exit_code: int
    directory: Path
    report: dict


def run(cfg: dict) -> RunOutcome:
    """Execute a validated configuration and write its artifacts."""
    be = cfg["backend"]
    states, result = [], None
    if be in ("torus-spectral", "sphere-symmetric"):
        rows, asserts, summary, states, result = _grid_run(cfg)
    elif be == "ot-explicit":
        rows, asserts, summary = _ot_explicit_run(cfg)
    elif be == "ot-stretched":
        rows, asserts, summary = _ot_stretched_run(cfg)
    else:
        rows, asserts, summary = _identity_run(cfg)

    code = EXIT_OK
    status = "ok"
    if be == "torus-spectral" and result is not None and not result.completed:
        code, status = EXIT_SINGULAR, "singularity"
        summary["diagnostic"] = {"failure_time": result.failure_time, "reason": result.failure_reason}
    elif not all(a.passed for a in asserts):
        code, status = EXIT_ASSERTION, "assertion-failed"

    out = output_dir(cfg)
    (out / "states").mkdir(parents=True, exist_ok=True)
    for old in (out / "states").glob("*.json"):
        old.unlink()
    (out / "run.csv").write_text(est.rows_to_csv(rows))
    for i, s in enumerate(states):
        (out / "states" / f"state_{i:03d}.json").write_text(
            json.dumps(s.snapshot(), separators=(",", ":")) + "\n")
    report = {"name": cfg["name"], "backend": be, "exit_code": code, "status": status,
              "assertions": [a.to_dict() for a in asserts], "summary": summary}
    (out / "config.json").write_text(_dump(cfg))
    (out / "report.json").write_text(_dump(report))
    return RunOutcome(code, out, report)
