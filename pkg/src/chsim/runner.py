"""Run a configuration end to end and write its artifacts."""
from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .characteristics import default_seeds, new_bundle, pullback_residual
from .config import RunConfig
from .diagnostics import COLUMNS, DiagnosticsRecord, Recorder
from .dynamics import State, build_momentum, make_state
from .integrator import ObserverError, RunResult, Status, run

__all__ = [
    "OUTPUT_ROOT_ENV",
    "RunOutcome",
    "output_root",
    "initial_state",
    "run_simulation",
    "format_real",
    "write_csv",
    "read_snapshot",
]

OUTPUT_ROOT_ENV = "CHSIM_OUTPUT_ROOT"
CHAR_COLUMNS = ("t", "seed", "q", "qx", "phase", "residual_m", "residual_n")


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "chsim_runs"))


def format_real(v) -> str:
    """Shortest decimal string that round-trips to the same double."""
    return repr(float(v))


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_real(v) for v in row) + "\n")


def read_snapshot(path):
    """Load an ``x,value`` snapshot; returns ``(x, values)``."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1]


def initial_state(cfg: RunConfig) -> State:
    grid = cfg.grid.build()
    m = build_momentum(grid, cfg.m0)
    n = build_momentum(grid, cfg.n0)
    return make_state(cfg.system, grid, m, n)


@dataclass
class RunOutcome:
    config: RunConfig
    directory: Path
    status: Status | None
    t_stop: float
    reason: str
    records: list[DiagnosticsRecord]
    char_rows: list[tuple] = field(default_factory=list)
    result: RunResult | None = None
    error: str = ""
    wall_time: float = 0.0
    manifest: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        if self.error:
            return 1
        return 0 if self.status in (Status.COMPLETED, Status.BLOWUP) else 1


class _CharacteristicsLog:
    name = "characteristics"

    def __init__(self):
        self.rows: list[tuple] = []

    def __call__(self, s, d, bundle) -> None:
        if bundle is None:
            return
        rm, rn = pullback_residual(bundle, s)
        if not (np.all(np.isfinite(bundle.q)) and np.all(np.isfinite(bundle.log_qx))):
            raise FloatingPointError("non-finite characteristic data")
        for i in range(bundle.seeds.size):
            self.rows.append((s.t, bundle.seeds[i], bundle.q[i], bundle.qx[i],
                              bundle.phase[i], rm[i], rn[i]))


class _Snapshots:
    name = "snapshots"

    def __init__(self, directory: Path, every: int):
        self.directory, self.every, self.count = directory, every, 0

    def __call__(self, s, d, bundle) -> None:
        if self.every and self.count % self.every == 0:
            idx = self.count // self.every
            x = s.grid.x
            write_csv(self.directory / f"m_{idx:05d}.csv", ("x", "value"), zip(x, s.m))
            write_csv(self.directory / f"n_{idx:05d}.csv", ("x", "value"), zip(x, s.n))
        self.count += 1


def run_simulation(cfg: RunConfig, directory=None, extra_manifest: dict | None = None,
                   write: bool = True, extra_observers=()) -> RunOutcome:
    """Integrate ``cfg`` and write diagnostics.csv, characteristics.csv and manifest.json."""
    if directory is None:
        directory = Path(cfg.outputs.directory) if cfg.outputs.directory \
            else output_root() / cfg.outputs.name
    directory = Path(directory)
    if write:
        directory.mkdir(parents=True, exist_ok=True)
    s0 = initial_state(cfg)
    seeds = default_seeds(s0.grid, s0.m, s0.n, cfg.characteristics.n_seeds,
                          cfg.characteristics.extra_seeds)
    bundle = new_bundle(s0, seeds) if seeds.size else None
    rec, chars = Recorder(), _CharacteristicsLog()
    observers = [rec, chars, *extra_observers]
    if write and cfg.outputs.snapshot_every:
        observers.append(_Snapshots(directory, cfg.outputs.snapshot_every))

    t0 = time.perf_counter()
    result, error = None, ""
    try:
        result = run(s0, cfg.integrator, observers, bundle=bundle)
        status, t_stop, reason = result.status.status, result.status.t_stop, result.status.reason
    except ObserverError as exc:
        status, t_stop, reason, error = None, exc.t, "", str(exc)
    wall = time.perf_counter() - t0

    manifest = {
        "config": cfg.to_dict(),
        "code_version": __version__,
        "status": {"status": status.value if status else "aborted", "t_stop": t_stop,
                   "reason": reason or error},
        "n_steps": result.n_steps if result else None,
        "n_samples": len(rec.records),
        "wall_time_s": wall,
    }
    if extra_manifest:
        manifest.update(extra_manifest)
    out = RunOutcome(cfg, directory, status, t_stop, reason, rec.records, chars.rows,
                     result, error, wall, manifest)
    if write:
        write_artifacts(out)
    return out


def write_artifacts(out: RunOutcome) -> None:
    d = out.directory
    write_csv(d / "diagnostics.csv", COLUMNS, (r.as_row() for r in out.records))
    write_csv(d / "characteristics.csv", CHAR_COLUMNS, out.char_rows)
    with open(d / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(out.manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
