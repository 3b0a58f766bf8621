"""Run orchestration: stages, CSV emission and the run manifest."""
from __future__ import annotations

import csv
import json
import logging
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

import tclgen
from tclgen.config import RunConfig
from tclgen.dynamics import (COND_LIMIT, TCLGrid, convergence_study, exact_map_single_mode,
                             propagate, suggested_cutoff)
from tclgen.generator import (GeneratorSeries, IdentityViolation, build_series, canonical_decompose,
                              identity_residuals)
from tclgen.quadrature import QuadratureSpec

log = logging.getLogger("tclgen")

IDENTITY_TOL = 1e-8
DECOMPOSE_TOL = 1e-8
IDENTITY_SEED = 0
IDENTITY_SAMPLES = 4


def fmt(x: float) -> str:
    # shortest round-trip repr; + 0.0 folds -0.0 into 0.0
    return repr(float(x) + 0.0)


def complex_columns(prefix: str, shape: Sequence[int]) -> list[str]:
    cols = []
    for idx in np.ndindex(*shape):
        tag = "_".join(str(i) for i in idx)
        cols += [f"{prefix}_{tag}_re", f"{prefix}_{tag}_im"]
    return cols


def complex_cells(x: np.ndarray) -> list[str]:
    out = []
    for v in np.asarray(x).ravel():
        out += [fmt(v.real), fmt(v.imag)]
    return out


def write_csv(path: Path, header: list[str], rows: Iterable[list[str]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


class Timer:
    def __init__(self):
        self.stages: dict[str, float] = {}

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        log.info("stage %s ...", name)
        yield
        self.stages[name] = round(time.perf_counter() - t0, 6)
        log.info("stage %s done in %.2fs", name, self.stages[name])


def _check_identities(series: GeneratorSeries) -> dict[str, float]:
    mats = [L for Ls in series.orders.values() for L in Ls]
    scale = max([1.0] + [float(np.max(np.abs(L))) for L in mats])
    res = identity_residuals(mats, np.random.default_rng(IDENTITY_SEED), IDENTITY_SAMPLES)
    for name, key in (("trace annihilation", "trace_annihilation"),
                      ("Hermiticity preservation", "hermiticity_preservation")):
        if res[key] > IDENTITY_TOL * scale:
            raise IdentityViolation(name, res[key], IDENTITY_TOL * scale)
    return res


def execute(cfg: RunConfig, out_dir, threads: int = 1) -> dict:
    """Run every requested stage, write the CSVs and ``manifest.json``; return the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    timer = Timer()
    m = cfg.model()
    b = cfg.bath_model()
    q = QuadratureSpec(cfg.nodes)
    grid = cfg.time_grid()
    d = cfg.dim
    wanted = set(cfg.outputs)
    diagnostics: dict = {}
    files: list[str] = []

    needs_series = wanted & {"generator", "canonical", "hamiltonian", "trajectory", "rates"}
    if needs_series:
        # half-step grid so RK4 sees the generator at its exact stage times
        fine = np.linspace(0.0, cfg.t_max, 2 * cfg.steps + 1) if "trajectory" in wanted else grid
        with timer.stage("generator"):
            series = build_series(m, b, cfg.max_order, fine, q, cfg.suppression, threads)
            diagnostics["identity_residuals"] = _check_identities(series)
        total = series.total() if m.lam != 0 else np.zeros((fine.size, d * d, d * d), dtype=complex)
        stride = 2 if "trajectory" in wanted else 1
        on_grid = total[::stride]

        if wanted & {"canonical", "hamiltonian", "rates"}:
            with timer.stage("canonical"):
                forms = [canonical_decompose(L, DECOMPOSE_TOL) for L in on_grid]
            rates = np.array([f.canonical_rates for f in forms])
            negative = grid[np.any(rates < -1e-12, axis=1)]
            diagnostics["first_negative_rate_time"] = float(negative[0]) if negative.size else None

        if "generator" in wanted:
            write_csv(out / "generator.csv", ["t"] + complex_columns("L", (d * d, d * d)),
                      ([fmt(t)] + complex_cells(L) for t, L in zip(grid, on_grid)))
            files.append("generator.csv")
        if "canonical" in wanted:
            write_csv(out / "canonical.csv", ["t"] + complex_columns("gamma", (d * d - 1, d * d - 1)),
                      ([fmt(t)] + complex_cells(f.gamma) for t, f in zip(grid, forms)))
            files.append("canonical.csv")
        if "hamiltonian" in wanted:
            write_csv(out / "hamiltonian.csv", ["t"] + complex_columns("K", (d, d)),
                      ([fmt(t)] + complex_cells(f.K) for t, f in zip(grid, forms)))
            files.append("hamiltonian.csv")
        if "rates" in wanted:
            write_csv(out / "rates.csv", ["t"] + [f"rate_{i}" for i in range(d * d - 1)],
                      ([fmt(t)] + [fmt(r) for r in row] for t, row in zip(grid, rates)))
            files.append("rates.csv")
        if "trajectory" in wanted:
            with timer.stage("trajectory"):
                gen = TCLGrid(fine, total, np.ones(fine.size))
                traj = propagate(gen, cfg.initial_state, grid).to_schroedinger(m)
            write_csv(out / "trajectory.csv", ["t"] + complex_columns("rho", (d, d)) + ["min_eigenvalue"],
                      ([fmt(t)] + complex_cells(r) + [fmt(e)]
                       for t, r, e in zip(grid, traj.states, traj.min_eigenvalues)))
            files.append("trajectory.csv")
            diagnostics["min_state_eigenvalue"] = float(np.min(traj.min_eigenvalues))

    if "convergence" in wanted:
        c = cfg.convergence
        with timer.stage("convergence"):
            study = convergence_study(m, b, cfg.max_order, c.t_star, c.lambdas, q,
                                      c.fock_cutoff, cfg.suppression, threads)
        write_csv(out / "convergence.csv", ["lambda", "residual"],
                  ([fmt(x), fmt(r)] for x, r in zip(study.lambdas, study.residuals)))
        files.append("convergence.csv")
        diagnostics["convergence_slope"] = study.slope

    if cfg.oracle_cutoff is not None:
        with timer.stage("oracle"):
            g = exact_map_single_mode(m, b, cfg.oracle_cutoff, grid, picture="interaction",
                                      threads=threads)
            conds = np.array([np.linalg.cond(p) for p in g.maps])
        diagnostics["map_condition_max"] = float(np.max(conds))
        diagnostics["map_singular"] = bool(np.any(conds > COND_LIMIT))

    manifest = {
        "artifact": "tclgen",
        "version": tclgen.__version__,
        "config": cfg.raw,
        "outputs": files,
        "timings_seconds": timer.stages,
        "tolerances": {
            "identity_check": IDENTITY_TOL,
            "decomposition": DECOMPOSE_TOL,
            "condition_limit": COND_LIMIT,
            "quadrature_nodes": cfg.nodes,
            "suggested_fock_cutoff": (suggested_cutoff(cfg.bath.nbar)
                                      if cfg.bath.kind == "single_mode_thermal" else None),
        },
        "diagnostics": diagnostics,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, default=_json_default)
        fh.write("\n")
    return manifest


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")
