"""Canonical experiments with pass/fail rules evaluated from their artifacts."""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .besov import BesovParams, build_partition, besov_norm, dyadic_block, sobolev_norm
from .blowup import ThresholdFamily, blowup_inputs, predict
from .config import RunConfig, apply_overrides, config_from_dict
from .diagnostics import COLUMNS, support_separation_check
from .runner import (CHAR_COLUMNS, initial_state, output_root, run_simulation, write_csv)
from .spectral_core import Grid1D

__all__ = ["PresetKind", "PRESETS", "run_preset", "evaluate_directory", "preset_config",
           "BLOWUP_MARGIN"]

BLOWUP_MARGIN = 2.0
INDICATOR_GROWTH = 1e3


class PresetKind(str, enum.Enum):
    CONSERVATION_A = "ConservationA"
    CONSERVATION_B = "ConservationB"
    GLOBAL_SUPPORT_A = "GlobalSupportA"
    PULLBACK_A = "PullbackA"
    PULLBACK_B = "PullbackB"
    BLOWUP_A_SIGN = "BlowupA_sign"
    BLOWUP_A_L1 = "BlowupA_L1"
    BLOWUP_B_SIGN = "BlowupB_sign"
    BESOV_SANITY = "BesovSanity"

    @classmethod
    def parse(cls, value) -> "PresetKind":
        if isinstance(value, cls):
            return value
        for k in cls:
            if str(value).lower() == k.value.lower():
                return k
        raise ValueError(f"unknown preset {value!r}; choose from {[k.value for k in cls]}")


def _gauss(amplitude, center, width):
    return [{"family": "gaussian", "amplitude": amplitude, "center": center, "width": width, "sign": 1}]


def _unit_mass(mass, center, width):
    return _gauss(mass / (width * math.sqrt(math.pi)), center, width)


_GAUSSIAN_PAIR = {"m0": _gauss(1.0, -0.5, 1.0), "n0": _gauss(1.0, 0.5, 1.0)}

# Blow-up data: unit-mass m just left of a narrow unit-mass n spike at x0 = 0,
# so that Q_x(0, 0) ~ -n0 P0 / 2 (system A) or n0 u0_x / 2 (system B) is very
# negative. Threshold margins at these settings: A_L1 2.79, A_sign 2.69,
# B_sign 2.41 (all >= BLOWUP_MARGIN).
_BLOWUP_A = {"m0": _unit_mass(1.0, -0.3, 0.1), "n0": _unit_mass(1.0, 0.0, 0.01)}
_BLOWUP_B = {"m0": _unit_mass(1.0, -0.2, 0.1), "n0": _unit_mass(1.0, 0.0, 0.004)}

_RAW = {
    PresetKind.CONSERVATION_A: {"system": "A", "init": _GAUSSIAN_PAIR,
                                "integrator": {"t_end": 1.0, "cfl": 0.3, "sample_interval": 0.1}},
    PresetKind.CONSERVATION_B: {"system": "B", "init": _GAUSSIAN_PAIR,
                                "integrator": {"t_end": 1.0, "cfl": 0.3, "sample_interval": 0.1}},
    PresetKind.GLOBAL_SUPPORT_A: {
        "system": "A", "grid": {"n_points": 4096, "L": 30.0},
        "init": {"m0": [{"family": "bump", "amplitude": 1.0, "center": 6.0, "width": 2.0}],
                 "n0": [{"family": "bump", "amplitude": 1.0, "center": -6.0, "width": 2.0}]},
        "integrator": {"t_end": 2.0, "sample_interval": 0.1},
        "characteristics": {"extra_seeds": [-4.0, 4.0]},
    },
    PresetKind.PULLBACK_A: {"system": "A", "init": _GAUSSIAN_PAIR,
                            "integrator": {"t_end": 1.0, "sample_interval": 0.1}},
    PresetKind.PULLBACK_B: {"system": "B", "init": _GAUSSIAN_PAIR,
                            "integrator": {"t_end": 1.0, "sample_interval": 0.1}},
    PresetKind.BLOWUP_A_SIGN: {
        "system": "A", "grid": {"n_points": 8192, "L": 8.0}, "init": _BLOWUP_A,
        "integrator": {"t_end": 1.0, "sample_interval": 0.005, "dt_min": 1e-13},
        "characteristics": {"n_seeds": 16, "extra_seeds": [0.0]},
    },
    PresetKind.BLOWUP_A_L1: {
        "system": "A", "grid": {"n_points": 8192, "L": 8.0}, "init": _BLOWUP_A,
        "integrator": {"t_end": 1.0, "sample_interval": 0.005, "dt_min": 1e-13},
        "characteristics": {"n_seeds": 16, "extra_seeds": [0.0]},
    },
    PresetKind.BLOWUP_B_SIGN: {
        "system": "B", "grid": {"n_points": 16384, "L": 6.0}, "init": _BLOWUP_B,
        "integrator": {"t_end": 1.0, "sample_interval": 0.005, "dt_min": 1e-13},
        "characteristics": {"n_seeds": 16, "extra_seeds": [0.0]},
    },
    PresetKind.BESOV_SANITY: {"system": "A", "grid": {"n_points": 512, "L": 20.0}},
}

_FAMILY = {PresetKind.BLOWUP_A_SIGN: ThresholdFamily.A_SIGN,
           PresetKind.BLOWUP_A_L1: ThresholdFamily.A_L1,
           PresetKind.BLOWUP_B_SIGN: ThresholdFamily.B_SIGN}


def preset_config(kind) -> RunConfig:
    kind = PresetKind.parse(kind)
    raw = json.loads(json.dumps(_RAW[kind]))
    raw.setdefault("outputs", {})["name"] = kind.value
    return config_from_dict(raw)


# -- artifact loading ------------------------------------------------------------


def _load_csv(path: Path, columns) -> dict[str, np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    if tuple(header) != tuple(columns):
        raise ValueError(f"{path.name}: unexpected header {header}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        data = np.zeros((0, len(columns)))
    return {c: data[:, i] for i, c in enumerate(columns)}


def _load_run(d: Path) -> dict:
    with open(d / "manifest.json", encoding="utf-8") as fh:
        manifest = json.load(fh)
    out = {"manifest": manifest, "diag": _load_csv(d / "diagnostics.csv", COLUMNS),
           "chars": _load_csv(d / "characteristics.csv", CHAR_COLUMNS)}
    if (d / "checks.csv").exists():
        with open(d / "checks.csv", encoding="utf-8") as fh:
            cols = fh.readline().strip().split(",")
        out["checks"] = _load_csv(d / "checks.csv", cols)
    return out


def _rel_drift(series: np.ndarray) -> float:
    if series.size == 0:
        return 0.0
    ref = abs(series[0])
    dev = float(np.max(np.abs(series - series[0])))
    return dev / ref if ref > 0 else dev


# -- rules ----------------------------------------------------------------------


@dataclass
class Verdict:
    passed: bool
    measured: dict
    tolerance: dict


def _completed(run) -> bool:
    return run["manifest"]["status"]["status"] == "completed"


def _rule_conservation(cols):
    def rule(runs):
        run = runs["base"]
        measured = {c: _rel_drift(run["diag"][c]) for c in cols}
        tol = {c: (1e-8 if c.startswith("l1") else 1e-6) for c in cols}
        ok = _completed(run) and all(measured[c] < tol[c] for c in cols)
        measured["status"] = run["manifest"]["status"]["status"]
        return Verdict(ok, measured, tol)
    return rule


def _rule_global_support(runs):
    run = runs["base"]
    d = run["diag"]
    scale = float(d["sup_m"][0] + d["sup_n"][0])
    sep = float(np.max(run["checks"]["separation"]))
    ind = float(np.max(np.abs(d["indicatorA"])))
    t_stop = run["manifest"]["status"]["t_stop"]
    t_end = run["manifest"]["config"]["integrator"]["t_end"]
    measured = {"status": run["manifest"]["status"]["status"], "t_stop": t_stop,
                "separation_residual": sep / scale, "indicatorA_sup": ind / scale}
    tol = {"separation_residual": 1e-8, "indicatorA_sup": 1e-10}
    ok = _completed(run) and t_stop == t_end and sep < 1e-8 * scale and ind < 1e-10 * scale
    return Verdict(ok, measured, tol)


def _pullback_max(run) -> float:
    c = run["chars"]
    sup_m0 = float(run["diag"]["sup_m"][0])
    if c["t"].size == 0:
        return 0.0
    return float(max(np.max(np.abs(c["residual_m"])), np.max(np.abs(c["residual_n"])))) / sup_m0


def _rule_pullback(runs):
    coarse, fine = _pullback_max(runs["base"]), _pullback_max(runs["refined"])
    ratio = coarse / fine if fine > 0 else math.inf
    measured = {"max_residual_rel": coarse, "refined_max_residual_rel": fine,
                "refinement_ratio": ratio}
    tol = {"max_residual_rel": 1e-4, "refinement_ratio_min": 4.0}
    ok = _completed(runs["base"]) and _completed(runs["refined"]) and coarse < 1e-4 and ratio >= 4.0
    return Verdict(ok, measured, tol)


def _rule_blowup(kind: PresetKind):
    def rule(runs):
        run = runs["base"]
        man, d = run["manifest"], run["diag"]
        pred = man["prediction"]
        status = man["status"]["status"]
        t_stop = man["status"]["t_stop"]
        T0 = pred["T0_upper"]
        if kind is PresetKind.BLOWUP_B_SIGN:
            g_inf = float(np.max(np.abs(d["indicatorB_inf"])) / abs(d["indicatorB_inf"][0]))
            g_cross = float(np.max(d["indicatorB_cross"]) / d["indicatorB_cross"][0])
            growth = max(g_inf, g_cross)
            extra = {"indicatorB_inf_growth": g_inf, "indicatorB_cross_growth": g_cross}
        else:
            growth = float(np.max(np.abs(d["indicatorA"])) / abs(d["indicatorA"][0]))
            extra = {"indicatorA_growth": growth}
        margin = pred["Qx0"] / pred["threshold"]
        measured = {"status": status, "t_stop": t_stop, "T0_upper": T0, "triggered": pred["triggered"],
                    "threshold_margin": margin, "indicator_growth": growth, **extra}
        tol = {"indicator_growth_min": INDICATOR_GROWTH, "threshold_margin_min": BLOWUP_MARGIN,
               "t_stop_max": T0}
        ok = (pred["triggered"] and margin >= BLOWUP_MARGIN and status == "blowup_detected"
              and T0 is not None and t_stop <= T0 and growth >= INDICATOR_GROWTH)
        return Verdict(bool(ok), measured, tol)
    return rule


def _rule_besov(runs):
    b = runs["besov"]
    ratios = np.array(b["ratios"])
    spread = float(np.max(np.abs(ratios[:, 1] / ratios[:, 0] - 1.0)))
    measured = {"partition_residual": b["partition_residual"],
                "reconstruction_residual": b["reconstruction_residual"],
                "ratio_spread_across_grids": spread}
    tol = {"partition_residual": 1e-12, "reconstruction_residual": 1e-10,
           "ratio_spread_across_grids": 0.10}
    ok = all(measured[k] < tol[k] for k in tol)
    return Verdict(ok, measured, tol)


_RULES: dict[PresetKind, Callable] = {
    PresetKind.CONSERVATION_A: _rule_conservation(("l1_m", "l1_n", "consA_mv", "consA_nu")),
    PresetKind.CONSERVATION_B: _rule_conservation(("consB_mvx", "consB_nux", "consB_mv", "consB_nu")),
    PresetKind.GLOBAL_SUPPORT_A: _rule_global_support,
    PresetKind.PULLBACK_A: _rule_pullback,
    PresetKind.PULLBACK_B: _rule_pullback,
    PresetKind.BLOWUP_A_SIGN: _rule_blowup(PresetKind.BLOWUP_A_SIGN),
    PresetKind.BLOWUP_A_L1: _rule_blowup(PresetKind.BLOWUP_A_L1),
    PresetKind.BLOWUP_B_SIGN: _rule_blowup(PresetKind.BLOWUP_B_SIGN),
    PresetKind.BESOV_SANITY: _rule_besov,
}

PRESETS = tuple(PresetKind)


# -- execution ------------------------------------------------------------------


class _SeparationCheck:
    name = "separation"

    def __init__(self, a: float, b: float):
        self.a, self.b = a, b
        self.rows: list[tuple] = []

    def __call__(self, s, d, bundle):
        self.rows.append((s.t, support_separation_check(s, bundle, self.a, self.b, d)))


def _run_with_checks(cfg: RunConfig, directory: Path, checks: _SeparationCheck):
    run_simulation(cfg, directory, extra_observers=[checks])
    write_csv(directory / "checks.csv", ("t", checks.name), checks.rows)


def _besov_corpus(L: float, n_fields: int = 20, max_mode: int = 100, seed: int = 20240611):
    """Random trigonometric polynomials on ``[-L, L)`` with modes ``|j| <= max_mode``."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_fields):
        j = np.arange(1, max_mode + 1)
        decay = (1.0 + j / 10.0) ** -2
        a = rng.normal(size=max_mode) * decay
        b = rng.normal(size=max_mode) * decay
        out.append((rng.normal(), j, a, b))
    return out


def _eval_corpus(grid: Grid1D, corpus):
    x = grid.x + grid.half_length
    k = np.pi / grid.half_length
    fields = []
    for c0, j, a, b in corpus:
        ph = np.outer(x, j * k)
        fields.append(c0 + np.cos(ph) @ a + np.sin(ph) @ b)
    return fields


def _besov_sanity(cfg: RunConfig, directory: Path) -> dict:
    directory.mkdir(parents=True, exist_ok=True)
    L = cfg.grid.L
    corpus = _besov_corpus(L)
    params = BesovParams(1.0, 2, 2)
    ratios, part_res, rec_res = [], 0.0, 0.0
    per_grid = []
    for n in (cfg.grid.n_points, 2 * cfg.grid.n_points):
        grid = Grid1D(n, L)
        part = build_partition(grid)
        part_res = max(part_res, part.identity_residual())
        fs = _eval_corpus(grid, corpus)
        r = []
        for u in fs:
            recon = sum(dyadic_block(u, j, part) for j in part.indices)
            rec_res = max(rec_res, float(np.max(np.abs(recon - u))))
            r.append(besov_norm(u, params, part) / sobolev_norm(grid, u, 1.0))
        per_grid.append(r)
    ratios = [list(p) for p in zip(*per_grid)]
    out = {"partition_residual": part_res, "reconstruction_residual": rec_res,
           "ratios": ratios, "grids": [cfg.grid.n_points, 2 * cfg.grid.n_points],
           "params": {"s": 1.0, "p": 2, "r": 2}}
    with open(directory / "besov.json", "w", encoding="utf-8") as fh:
        json.dump(out, fh, indent=2, sort_keys=True)
        fh.write("\n")
    manifest = {"config": cfg.to_dict(), "status": {"status": "completed", "t_stop": 0.0, "reason": ""}}
    with open(directory / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out


def _prediction_manifest(cfg: RunConfig, kind: PresetKind) -> dict:
    s0 = initial_state(cfg)
    inp, cert = blowup_inputs(s0, _FAMILY[kind], x0=0.0)
    pred = predict(inp, cert.derivation)
    return {"prediction": pred.to_dict(), "T0_upper": pred.T0_upper,
            "calibration": {"threshold_margin": inp.Qx0 / pred.threshold,
                            "required_margin": BLOWUP_MARGIN}}


def evaluate_directory(kind, directory) -> Verdict:
    """Recompute the pass rule of ``kind`` from artifacts already on disk."""
    kind = PresetKind.parse(kind)
    directory = Path(directory)
    if kind is PresetKind.BESOV_SANITY:
        with open(directory / "besov.json", encoding="utf-8") as fh:
            return _RULES[kind]({"besov": json.load(fh)})
    runs = {"base": _load_run(directory)}
    if (directory / "refined").exists():
        runs["refined"] = _load_run(directory / "refined")
    return _RULES[kind](runs)


def run_preset(kind, overrides=(), root=None) -> dict:
    """Run a preset, evaluate its rule from the written artifacts and write report.json."""
    kind = PresetKind.parse(kind)
    cfg = apply_overrides(preset_config(kind), overrides) if overrides else preset_config(kind)
    directory = Path(cfg.outputs.directory) if cfg.outputs.directory \
        else Path(root if root is not None else output_root()) / kind.value
    artifacts = []
    if kind is PresetKind.BESOV_SANITY:
        _besov_sanity(cfg, directory)
        artifacts = ["besov.json", "manifest.json"]
    elif kind is PresetKind.GLOBAL_SUPPORT_A:
        a, b = sorted(cfg.characteristics.extra_seeds)[:2] if len(cfg.characteristics.extra_seeds) >= 2 \
            else (-4.0, 4.0)
        _run_with_checks(cfg, directory, _SeparationCheck(a, b))
        artifacts = ["diagnostics.csv", "characteristics.csv", "checks.csv", "manifest.json"]
    elif kind in _FAMILY:
        run_simulation(cfg, directory, _prediction_manifest(cfg, kind))
        artifacts = ["diagnostics.csv", "characteristics.csv", "manifest.json"]
    else:
        run_simulation(cfg, directory)
        artifacts = ["diagnostics.csv", "characteristics.csv", "manifest.json"]
        if kind in (PresetKind.PULLBACK_A, PresetKind.PULLBACK_B):
            fine = replace(cfg, grid=replace(cfg.grid, n_points=2 * cfg.grid.n_points))
            run_simulation(fine, directory / "refined")
            artifacts += [f"refined/{a}" for a in ("diagnostics.csv", "characteristics.csv", "manifest.json")]
    verdict = evaluate_directory(kind, directory)
    report = {"preset": kind.value, "pass": bool(verdict.passed), "measured": verdict.measured,
              "tolerance": verdict.tolerance, "artifacts": artifacts}
    with open(directory / "manifest.json", encoding="utf-8") as fh:
        manifest = json.load(fh)
    manifest["preset_report"] = {k: report[k] for k in ("pass", "measured", "tolerance")}
    _write_json(directory / "manifest.json", manifest)
    _write_json(directory / "report.json", report)
    report["directory"] = str(directory)
    return report


def _write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
