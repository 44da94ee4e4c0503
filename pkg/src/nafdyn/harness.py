"""Ensemble runs, momentum scans, exact-grid runs, output files and comparisons."""
import concurrent.futures as cf
import csv
import json
import math
import multiprocessing as mp
import os
import tempfile
import time
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import reference
from .config import record_steps, spec_to_dict, with_model_parameter
from .dynamics import advance_trajectory, initialize, make_method, total_energy
from .errors import ConfigError, EnsembleFailure
from .estimators import (Accumulator, ObservableRequest, TimeSeries, channel_names, channel_values, estimate_density,
                         finalize_columns, momentum_distribution, scattering_channel_names,
                         scattering_values)
from .models import SCATTERING_MODELS, build_model

FAILURE_LIMIT = 0.05
WORKERS_ENV = "NAFDYN_WORKERS"
SINGLE_TRAJECTORY_FLAG = "single trajectory: standard errors undefined, written as 0"


@dataclass
class RunReport:
    series: TimeSeries
    channels: dict = None           # name -> (estimate, stderr)
    momentum: tuple = None          # (grid, density, stderr)
    wall_time: float = 0.0
    n_failed: int = 0
    n_traj: int = 0
    config: dict = None
    seed: int = 0
    method: str = ""
    diagnostics: dict = field(default_factory=dict)

    @property
    def failure_fraction(self):
        return self.n_failed / self.n_traj if self.n_traj else 0.0


def resolve_workers(requested=None, spec=None):
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
    elif requested is not None:
        n = int(requested)
    else:
        n = spec.workers if spec is not None else 1
    if n < 1:
        raise ConfigError("worker count must be at least 1")
    return n


# ---------------------------------------------------------------------------
# one chunk of trajectories

_MODEL_CACHE = {}


def _model_for(spec):
    key = json.dumps(spec.model, sort_keys=True)
    if key not in _MODEL_CACHE:
        _MODEL_CACHE[key] = build_model(spec.model)
    return _MODEL_CACHE[key]


def _series_requests(spec):
    return [r for r in spec.observables if r.kind not in ("momentum_distribution", "scattering")]


@dataclass
class ChunkResult:
    n: int
    mean: np.ndarray     # (n_records, n_channels)
    m2: np.ndarray
    failed: list
    P_final: np.ndarray  # (n, N) survivors
    weights: np.ndarray  # (n,)
    channel_values: np.ndarray  # (n, 2F) or None
    events: dict
    max_energy_error: float
    inside: int = 0


def _propagate_chunk(spec, model, method, indices):
    requests = _series_requests(spec)
    steps = set(record_steps(spec))
    n_records = len(steps)
    state = initialize(model, method, indices, spec.seed, occupation=spec.occupation)
    B = len(indices)
    H0 = state.H0.copy()
    sums = None
    events = {"switched": 0, "frustrated": 0, "halved": 0, "reflected": 0}
    energy_err = 0.0
    rec = 0

    def record(state, rec):
        nonlocal sums
        vals = [channel_values(r, model, method, state, state.w0) for r in requests]
        vals = np.concatenate(vals, axis=1) if vals else np.zeros((B, 0))
        vals = np.where(state.failed[:, None], 0.0, vals)
        if sums is None:
            sums = np.zeros((2, n_records, vals.shape[1]))
        sums[0, rec] = vals.sum(axis=0)
        sums[1, rec] = (vals * vals).sum(axis=0)

    record(state, rec)
    for step in range(1, spec.n_steps + 1):
        out = advance_trajectory(state, model, method, spec.dt)
        state = out.state
        for name in events:
            events[name] += int(getattr(out.events, name).sum())
        if step in steps:
            rec += 1
            record(state, rec)
            if method.switching:
                live = ~state.failed
                if np.any(live):
                    H = total_energy(model, method, state)
                    err = np.abs(H - H0)[live] / np.maximum(np.abs(H0[live]), 1e-300)
                    energy_err = max(energy_err, float(err.max()))
    return state, sums, events, energy_err


def run_chunk(spec, indices):
    """Propagate trajectories ``indices``; failed ones are dropped by re-running
    the chunk without them, so survivors contribute complete histories."""
    model = _model_for(spec)
    method = make_method(spec.method, F=model.F, gamma=spec.gamma, electronic=spec.electronic,
                         hard_wall=spec.hard_wall)
    indices = np.asarray(indices, dtype=np.int64)
    failed = []
    keep = indices
    while True:
        if len(keep) == 0:
            return ChunkResult(0, None, None, sorted(failed), np.zeros((0, model.N)), np.zeros(0),
                               None, {}, 0.0)
        state, sums, events, energy_err = _propagate_chunk(spec, model, method, keep)
        if not np.any(state.failed):
            break
        failed += [int(i) for i in keep[state.failed]]
        keep = keep[~state.failed]
    n = len(keep)
    mean = sums[0] / n
    m2 = np.maximum(sums[1] - sums[0] * mean, 0.0)
    scatter, inside = None, 0
    if any(r.kind == "scattering" for r in spec.observables):
        pops = np.real(np.diagonal(estimate_density(state, method, "adiabatic"), axis1=-2, axis2=-1))
        scatter = scattering_values(state.R, pops, state.w0)
        if model.interaction_region is not None:
            inside = int(np.sum(np.abs(state.R[:, 0]) < model.interaction_region))
    return ChunkResult(n, mean, m2, sorted(failed), state.P.copy(), state.w0.copy(), scatter,
                       events, energy_err, inside)


def _chunk_job(args):
    spec, indices = args
    return run_chunk(spec, indices)


def _limit_threads():
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = "1"


def _map_chunks(spec, chunks, workers):
    jobs = [(spec, c) for c in chunks]
    if workers == 1 or len(chunks) == 1:
        return [_chunk_job(j) for j in jobs]
    ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else None
    with cf.ProcessPoolExecutor(max_workers=workers, mp_context=ctx, initializer=_limit_threads) as pool:
        # chunksize 1 lets idle workers pick up the next chunk; results come back in order
        return list(pool.map(_chunk_job, jobs, chunksize=1))


# ---------------------------------------------------------------------------
# ensembles


def run_ensemble(spec, workers=None):
    if spec.method == "exact_grid":
        return run_exact(spec)
    start = time.perf_counter()
    model = _model_for(spec)
    workers = resolve_workers(workers, spec)
    chunks = [np.arange(s, min(s + spec.chunk_size, spec.n_traj))
              for s in range(0, spec.n_traj, spec.chunk_size)]
    results = _map_chunks(spec, chunks, workers)

    failed = sorted(i for r in results for i in r.failed)
    if len(failed) >= FAILURE_LIMIT * spec.n_traj:
        raise EnsembleFailure(f"{len(failed)} of {spec.n_traj} trajectories failed "
                              f"(limit {FAILURE_LIMIT:.0%}); first failed indices: {failed[:10]}")
    names = [n for r in _series_requests(spec) for n in channel_names(r, model)]
    times = np.array(record_steps(spec), dtype=float) * spec.dt
    acc = Accumulator((len(times), len(names)))
    for r in results:
        if r.n:
            part = Accumulator(r.mean.shape)
            part.n, part.mean, part.m2 = r.n, r.mean, r.m2
            acc.merge(part)
    flags = [SINGLE_TRAJECTORY_FLAG] if acc.n == 1 else []
    series = TimeSeries(times, finalize_columns(names, acc), acc.n, len(failed), flags)

    channels = None
    if any(r.kind == "scattering" for r in spec.observables):
        cacc = Accumulator((2 * model.F,))
        for r in results:
            if r.n:
                cacc.add(r.channel_values)
        err = cacc.stderr()
        channels = {n: (float(cacc.mean[i]), float(err[i]))
                    for i, n in enumerate(scattering_channel_names(model.F))}
        inside = sum(r.inside for r in results)
        if inside:
            warnings.warn(f"{inside} trajectories are still inside the coupling region", RuntimeWarning)
    momentum = None
    req = [r for r in spec.observables if r.kind == "momentum_distribution"]
    if req:
        r = req[0]
        grid = np.linspace(*r.grid[:2], int(r.grid[2]))
        P = np.concatenate([c.P_final[:, r.indices[0]] for c in results])
        w = np.concatenate([c.weights for c in results])
        dens, err = momentum_distribution(P, w, r.damping, grid, return_stderr=True)
        momentum = (grid, dens, err)

    events = {}
    for r in results:
        for k, v in r.events.items():
            events[k] = events.get(k, 0) + v
    diagnostics = dict(events=events, failed_indices=failed[:100],
                       max_energy_error=max((r.max_energy_error for r in results), default=0.0),
                       workers=workers, n_steps=spec.n_steps, dt=spec.dt, t_final=spec.t_final)
    return RunReport(series, channels, momentum, time.perf_counter() - start, len(failed),
                     spec.n_traj, spec_to_dict(spec), spec.seed, spec.method, diagnostics)


def _grid_series(spec, model, snapshots, frames_T):
    names = [n for req in _series_requests(spec) for n in channel_names(req, model)]
    dx = snapshots[0].dx
    rows = []
    for wf in snapshots:
        psi = wf.psi
        rho_d = np.einsum("ni,mi->nm", psi, np.conj(psi)) * dx
        phi = np.einsum("ink,ni->ki", frames_T, psi)
        rho_a = np.einsum("ni,mi->nm", phi, np.conj(phi)) * dx
        k = 2.0 * np.pi * np.fft.fftfreq(len(wf.grid), dx)
        dens_k = np.sum(np.abs(np.fft.fft(psi, axis=1)) ** 2, axis=0)
        row = []
        for req in _series_requests(spec):
            rho = rho_d if req.representation == "diabatic" else rho_a
            if req.kind == "population":
                row += [rho[n, n].real for n in (req.indices or range(model.F))]
            elif req.kind == "coherence":
                for n, m in req.indices:
                    row += [rho[n, m].real, rho[n, m].imag]
            elif req.kind == "population_difference":
                n, m = req.indices
                row.append((rho[n, n] - rho[m, m]).real)
            elif req.kind == "mean_R":
                row.append(float(np.sum(np.abs(psi) ** 2 * wf.grid) * dx))
            elif req.kind == "mean_P":
                row.append(float(np.sum(dens_k * k) / np.sum(dens_k)))
        rows.append(row)
    return names, np.array(rows, dtype=float).reshape(len(snapshots), len(names))


def run_exact(spec):
    """Grid wavepacket reference for a one-dimensional model, with a refinement check."""
    start = time.perf_counter()
    model = _model_for(spec)
    if model.N != 1:
        raise ConfigError("exact_grid needs a model with one nuclear DOF")
    req = [r for r in spec.observables if r.kind == "momentum_distribution"]
    p_grid = a = None
    if req:
        p_grid = np.linspace(*req[0].grid[:2], int(req[0].grid[2]))
        a = req[0].damping
    lo, hi, n = reference.DEFAULT_GRIDS.get(model.label, (None, None, None))
    if lo is None:
        raise ConfigError(f"no grid defined for model {model.label}")
    results = []
    for refine in (1, 2):
        grid = reference.make_grid(lo, hi, n * refine)
        h = spec.grid_dt / refine
        wf0 = reference.initial_wavefunction(model, grid, spec.occupation)
        # snapshot times follow the requested record spacing
        t_rec = spec.t_final / max(1, len(record_steps(spec)) - 1)
        every = max(1, int(round(t_rec / h)))
        snaps = reference.grid_propagate(model, wf0, h, spec.t_final, every)
        _, T = reference.grid_frames(model, grid)
        names, table = _grid_series(spec, model, snaps, T)
        obs = reference.reference_observables(model, [snaps[-1]], p_grid, a)
        results.append((np.array([s.t for s in snaps]), names, table, obs))
    (_, _, table_c, obs_c), (times, names, table, obs) = results
    deviation = max([abs(obs_c["channels"][k] - obs["channels"][k]) for k in obs["channels"]] +
                    [float(np.max(np.abs(table_c[-1] - table[-1]))) if table.size else 0.0])
    acc = Accumulator(table.shape)
    acc.n, acc.mean = 1, table
    series = TimeSeries(times, finalize_columns(names, acc), 1, 0, ["exact grid reference"])
    channels = None
    if any(r.kind == "scattering" for r in spec.observables):
        channels = {k: (v, 0.0) for k, v in obs["channels"].items()}
    momentum = None
    if p_grid is not None:
        grid, dens = obs["momentum"]
        momentum = (grid, dens, np.zeros_like(dens))
    diagnostics = dict(refinement_change=deviation, grid=(lo, hi, n * 2), grid_dt=spec.grid_dt / 2)
    return RunReport(series, channels, momentum, time.perf_counter() - start, 0, 1,
                     spec_to_dict(spec), spec.seed, "exact_grid", diagnostics)


def momentum_scan(spec, p0_values, workers=None):
    """One ensemble per initial momentum; returns (p0 array, {channel: (estimates, stderrs)})."""
    model = _model_for(spec)
    if model.label not in SCATTERING_MODELS:
        raise ConfigError("momentum scans need a one-dimensional scattering model")
    p0_values = [float(p) for p in p0_values]
    if not p0_values:
        raise ConfigError("give at least one initial momentum")
    scan_spec = spec
    if not any(r.kind == "scattering" for r in spec.observables):
        scan_spec = replace(spec, observables=spec.observables + (ObservableRequest("scattering", "adiabatic"),))
    table = {}
    reports = []
    for p0 in p0_values:
        report = run_ensemble(with_model_parameter(scan_spec, p0=p0), workers)
        reports.append(report)
        for name, (val, err) in report.channels.items():
            table.setdefault(name, ([], []))
            table[name][0].append(val)
            table[name][1].append(err)
    table = {k: (np.array(v), np.array(e)) for k, (v, e) in table.items()}
    return np.array(p0_values), table, reports


# ---------------------------------------------------------------------------
# output


def _fmt(x):
    return repr(float(x))


def _atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _table_text(first, xs, columns):
    """CSV with a leading abscissa and estimate/stderr column pairs."""
    header = [first]
    for name in columns:
        header += [name, f"{name}_stderr"]
    lines = [",".join(header)]
    for i, x in enumerate(xs):
        row = [_fmt(x)]
        for est, err in columns.values():
            row += [_fmt(est[i]), _fmt(err[i])]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def series_csv(report):
    return _table_text("time", report.series.times, report.series.columns)


def channels_csv(report):
    p0 = report.config["model"].get("p0", 0.0)
    cols = {k: (np.array([v]), np.array([e])) for k, (v, e) in report.channels.items()}
    return _table_text("p0", [p0], cols)


def scan_csv(p0_values, table):
    return _table_text("p0", p0_values, table)


def momentum_csv(momentum):
    grid, dens = momentum[0], momentum[1]
    lines = ["P,density"] + [f"{_fmt(p)},{_fmt(d)}" for p, d in zip(grid, dens)]
    return "\n".join(lines) + "\n"


def output_paths(base):
    base = Path(base)
    stem = base.with_suffix("") if base.suffix == ".csv" else base
    return dict(series=stem.with_suffix(".csv"),
                channels=stem.parent / f"{stem.name}_channels.csv",
                momentum=stem.parent / f"{stem.name}_momentum.csv",
                meta=stem.parent / f"{stem.name}.meta.json",
                plots=stem.parent / f"{stem.name}_plots")


def report_metadata(report):
    meta = dict(method=report.method, seed=report.seed, n_traj=report.n_traj,
                n_failed=report.n_failed, failure_fraction=report.failure_fraction,
                flags=list(report.series.flags), config=report.config,
                diagnostics={k: v for k, v in report.diagnostics.items() if k != "workers"})
    return meta


def emit_outputs(report, path, formats=("csv",)):
    """Write the time series CSV (plus channel, momentum and metadata files).

    ``formats`` may also contain "plot" for one two-column file per observable.
    Returns the list of written paths.  The wall time is left out of the files
    so that equal runs produce equal bytes.
    """
    unknown = set(formats) - {"csv", "plot"}
    if unknown:
        raise ConfigError(f"unknown output format(s): {', '.join(sorted(unknown))}")
    paths = output_paths(path)
    written = []
    if "csv" in formats:
        _atomic_write(paths["series"], series_csv(report))
        written.append(paths["series"])
        if report.channels is not None:
            _atomic_write(paths["channels"], channels_csv(report))
            written.append(paths["channels"])
        if report.momentum is not None:
            _atomic_write(paths["momentum"], momentum_csv(report.momentum))
            written.append(paths["momentum"])
        _atomic_write(paths["meta"], json.dumps(report_metadata(report), indent=2, sort_keys=True,
                                                default=_json_default) + "\n")
        written.append(paths["meta"])
    if "plot" in formats:
        for name, (est, _) in report.series.columns.items():
            p = paths["plots"] / f"{name}.dat"
            _atomic_write(p, "".join(f"{_fmt(t)} {_fmt(v)}\n" for t, v in zip(report.series.times, est)))
            written.append(p)
        if report.momentum is not None:
            p = paths["plots"] / "momentum.dat"
            _atomic_write(p, "".join(f"{_fmt(x)} {_fmt(v)}\n" for x, v in zip(*report.momentum[:2])))
            written.append(p)
    return written


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, tuple):
        return list(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


# ---------------------------------------------------------------------------
# comparison


def read_table(path):
    """Read a CSV written by emit_outputs: (abscissa name, x, {name: (values, stderr or None)})."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path} is empty")
    header, data = rows[0], np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    data = data.reshape(-1, len(header))
    cols = {}
    for i, name in enumerate(header[1:], start=1):
        if name.endswith("_stderr"):
            continue
        err = header.index(name + "_stderr") if name + "_stderr" in header else None
        cols[name] = (data[:, i], None if err is None else data[:, err])
    return header[0], data[:, 0], cols


@dataclass
class Comparison:
    max_abs: float
    rms: float
    z_scores: dict   # name -> largest |z| over the common grid (columns with errors only)
    n_points: int
    columns: list


def compare_tables(a, b):
    """Metrics between two tables (x, {name: (values, stderr)}); B is resampled
    onto A's abscissae inside the overlap."""
    xa, ca = a
    xb, cb = b
    common = [n for n in ca if n in cb]
    if not common:
        raise ConfigError("the two tables share no columns")
    lo, hi = max(xa.min(), xb.min()), min(xa.max(), xb.max())
    if lo > hi:
        raise ConfigError(f"disjoint ranges: [{xa.min():g}, {xa.max():g}] and [{xb.min():g}, {xb.max():g}]")
    tol = 1e-9 * max(1.0, abs(hi))
    mask = (xa >= lo - tol) & (xa <= hi + tol)
    x = xa[mask]
    same = len(xa) == len(xb) and np.array_equal(xa, xb)

    def on_grid(xs, v):
        if v is None:
            return np.zeros(len(x))
        if same:
            return v[mask]
        if len(xs) == 1:
            return np.full(len(x), v[0])
        order = np.argsort(xs)
        return np.interp(x, xs[order], v[order])

    diffs, z = [], {}
    for name in common:
        va, ea = ca[name][0][mask], on_grid(xa, ca[name][1])
        vb, eb = on_grid(xb, cb[name][0]), on_grid(xb, cb[name][1])
        d = va - vb
        diffs.append(d)
        if ca[name][1] is None and cb[name][1] is None:
            continue
        sigma = np.hypot(ea, eb)
        with np.errstate(divide="ignore", invalid="ignore"):
            zz = np.where(sigma > 0, d / sigma, np.where(d == 0, 0.0, np.inf))
        z[name] = float(np.max(np.abs(zz))) if len(zz) else 0.0
    d = np.concatenate(diffs)
    return Comparison(float(np.max(np.abs(d))), float(np.sqrt(np.mean(d * d))), z, len(x), common)


def compare(path_a, path_b):
    name_a, xa, ca = read_table(path_a)
    name_b, xb, cb = read_table(path_b)
    if name_a != name_b:
        raise ConfigError(f"abscissae differ: {name_a!r} vs {name_b!r}")
    return compare_tables((xa, ca), (xb, cb))
