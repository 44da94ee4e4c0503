"""Exact reference propagations for small systems.

* multi-state wavepackets on a uniform 1-D grid (split operator),
* electronic Schrodinger dynamics along a prescribed nuclear path,
* the Landau-Zener transition formula.
"""
from dataclasses import dataclass, replace

import numpy as np

from .adiabatic import align_columns, diagonalize
from .dynamics import expm_hermitian
from .errors import ConfigError, ExtentError

DEFAULT_GRIDS = {
    "tully_sac": (-40.0, 40.0, 4096),
    "tully_dac": (-40.0, 40.0, 4096),
    "tully_ecr": (-80.0, 80.0, 8192),
    "asym_sac": (-40.0, 40.0, 4096),
    "photodissociation_1": (0.5, 30.0, 8192),
    "photodissociation_2": (0.5, 30.0, 8192),
    "photodissociation_3": (0.5, 30.0, 8192),
}


@dataclass
class GridWavefunction:
    grid: np.ndarray
    psi: np.ndarray  # (F, n) diabatic components
    mass: float
    t: float = 0.0

    @property
    def dx(self):
        return self.grid[1] - self.grid[0]

    def norm(self):
        return float(np.sum(np.abs(self.psi) ** 2) * self.dx)


def make_grid(lo, hi, n):
    return np.linspace(lo, hi, int(n), endpoint=False)


def grid_frames(model, grid):
    """Adiabatic energies and eigenvectors along the grid, continuous in R."""
    V = model.potential(grid[:, None])
    E, T = diagonalize(V)
    for i in range(1, len(grid)):
        E[i], T[i] = align_columns(E[i], T[i], T[i - 1])
    return E, T


def initial_wavefunction(model, grid, occupation=None):
    """Pure Gaussian packet matching the model's Wigner distribution, placed on
    the occupied diabatic or adiabatic state."""
    if model.N != 1:
        raise ConfigError("grid propagation needs a model with one nuclear DOF")
    spec = model.nuclear_init
    alpha = 0.5 / spec.sigma_R[0] ** 2
    if not np.isclose(spec.sigma_P[0], np.sqrt(0.5 * alpha)):
        raise ConfigError("initial distribution is not a minimum-uncertainty packet")
    R0, P0 = spec.mean_R[0], spec.mean_P[0]
    amp = np.exp(-0.5 * alpha * (grid - R0) ** 2 + 1j * P0 * (grid - R0))
    jocc, rep = model.occupation if occupation is None else occupation
    if rep == "adiabatic":
        _, T = grid_frames(model, grid)
        psi = T[:, :, jocc].T * amp
    else:
        psi = np.zeros((model.F, len(grid)), dtype=complex)
        psi[jocc] = amp
    wf = GridWavefunction(grid, psi.astype(complex), float(model.masses[0]))
    wf.psi /= np.sqrt(wf.norm())
    return wf


def _edge_norm(wf, fraction=0.05):
    m = max(1, int(fraction * len(wf.grid)))
    dens = np.sum(np.abs(wf.psi) ** 2, axis=0) * wf.dx
    return float(dens[:m].sum() + dens[-m:].sum())


def grid_propagate(model, psi0, dt, t_final, record_every=None, edge_tol=1e-6):
    """Split-operator propagation; returns snapshots every ``record_every`` steps
    (default: only the final one).  The step is shrunk slightly if needed so
    that it divides t_final."""
    grid, n = psi0.grid, len(psi0.grid)
    n_steps = max(1, int(np.ceil(t_final / dt - 1e-9)))
    dt = t_final / n_steps
    w, Q = np.linalg.eigh(model.potential(grid[:, None]))
    half = np.einsum("inm,im,ikm->ink", Q, np.exp(-0.5j * dt * w), Q)
    full = np.einsum("inm,im,ikm->ink", Q, np.exp(-1j * dt * w), Q)
    k = 2.0 * np.pi * np.fft.fftfreq(n, psi0.dx)
    kinetic = np.exp(-0.5j * dt * k * k / psi0.mass)
    record_every = n_steps if record_every is None else int(record_every)
    snaps = [replace(psi0, psi=psi0.psi.copy())]
    # psi holds the state after the leading potential half step
    psi = np.einsum("inm,mi->ni", half, psi0.psi)
    for step in range(1, n_steps + 1):
        psi = np.fft.ifft(kinetic * np.fft.fft(psi, axis=1), axis=1)
        if step % record_every == 0 or step == n_steps:
            wf = replace(psi0, psi=np.einsum("inm,mi->ni", half, psi), t=psi0.t + step * dt)
            edge = _edge_norm(wf)
            if edge > edge_tol:
                raise ExtentError(f"norm {edge:.2e} reached the grid edge at t = {wf.t:g}")
            snaps.append(wf)
        if step < n_steps:
            psi = np.einsum("inm,mi->ni", full, psi)
    return snaps


def grid_energy(model, wf):
    phi = np.fft.fft(wf.psi, axis=1)
    k = 2.0 * np.pi * np.fft.fftfreq(len(wf.grid), wf.dx)
    kin = np.sum(np.abs(phi) ** 2 * k * k) / (2.0 * wf.mass) / np.sum(np.abs(phi) ** 2)
    V = model.potential(wf.grid[:, None])
    pot = np.einsum("ni,inm,mi->", np.conj(wf.psi), V, wf.psi).real * wf.dx
    return kin * wf.norm() + pot


def momentum_density(wf, p_grid, a=None):
    """|psi(P)|^2 summed over states, optionally smoothed by a Gaussian of variance 2a."""
    n = len(wf.grid)
    p_grid = np.asarray(p_grid, dtype=float)
    scale = wf.dx**2 / (2.0 * np.pi)
    if a is None:
        # direct transform at the requested momenta, no interpolation
        out = np.empty(p_grid.shape)
        for s in range(0, len(p_grid), 256):
            phase = np.exp(-1j * p_grid[s:s + 256, None] * wf.grid[None, :])
            out[s:s + 256] = np.sum(np.abs(phase @ wf.psi.T) ** 2, axis=1) * scale
        return out
    k = 2.0 * np.pi * np.fft.fftfreq(n, wf.dx)
    dk = 2.0 * np.pi / (n * wf.dx)
    dens = np.sum(np.abs(np.fft.fft(wf.psi, axis=1)) ** 2, axis=0) * scale
    kern = np.exp(-((p_grid[:, None] - k[None, :]) ** 2) / (4.0 * a)) / (2.0 * np.sqrt(np.pi * a))
    return kern @ dens * dk


def reference_observables(model, snapshots, p_grid=None, a=None):
    """Populations, coherence, channel table and momentum density of grid snapshots."""
    grid = snapshots[0].grid
    dx = snapshots[0].dx
    _, T = grid_frames(model, grid)
    times, dia, adia, coh = [], [], [], []
    for wf in snapshots:
        times.append(wf.t)
        dia.append(np.sum(np.abs(wf.psi) ** 2, axis=1) * dx)
        phi = np.einsum("ink,ni->ki", T, wf.psi)
        adia.append(np.sum(np.abs(phi) ** 2, axis=1) * dx)
        coh.append(np.abs(np.sum(wf.psi[0] * np.conj(wf.psi[1])) * dx) if model.F > 1 else 0.0)
    final = snapshots[-1]
    phi = np.einsum("ink,ni->ki", T, final.psi)
    channels = {}
    for kst in range(model.F):
        dens = np.abs(phi[kst]) ** 2 * dx
        channels[f"reflection_{kst + 1}"] = float(dens[grid < 0].sum())
        channels[f"transmission_{kst + 1}"] = float(dens[grid > 0].sum())
    out = dict(times=np.array(times), populations_diabatic=np.array(dia),
               populations_adiabatic=np.array(adia), coherence_diabatic_1_2=np.array(coh),
               channels=channels)
    if p_grid is not None:
        out["momentum"] = (np.asarray(p_grid, dtype=float), momentum_density(final, p_grid, a))
    return out


def default_grid(model):
    if model.label not in DEFAULT_GRIDS:
        raise ConfigError(f"no default grid for model {model.label}")
    return make_grid(*DEFAULT_GRIDS[model.label])


def converged_reference(model, t_final, dt=0.5, grid=None, tol=1e-3, p_grid=None, a=None,
                        record_every=None):
    """Grid reference checked against a run with half the spacing and half the step.

    Returns (observables, deviation) where deviation is the largest change of
    any channel or final population between the two runs.
    """
    lo, hi, n = DEFAULT_GRIDS[model.label] if grid is None else grid
    results = []
    for refine in (1, 2):
        g = make_grid(lo, hi, n * refine)
        h = dt / refine
        every = None if record_every is None else record_every * refine
        snaps = grid_propagate(model, initial_wavefunction(model, g), h, t_final, every)
        results.append(reference_observables(model, snaps, p_grid, a))
    coarse, fine = results
    dev = max(abs(coarse["channels"][k] - fine["channels"][k]) for k in fine["channels"])
    dev = max(dev, float(np.max(np.abs(coarse["populations_diabatic"][-1] - fine["populations_diabatic"][-1]))))
    if dev > tol:
        raise ExtentError(f"grid reference not converged: change {dev:.2e} under refinement")
    return fine, dev


def frozen_nuclei_tdse(hamiltonian, c0, dt, t_final, t0=0.0, record_every=1):
    """Propagate amplitudes c0 (F or F x k) under a time-dependent Hermitian
    Hamiltonian with the fourth-order commutator-free Magnus step."""
    c = np.array(c0, dtype=complex)
    n_steps = int(round(t_final / dt))
    r = np.sqrt(3.0) / 6.0
    times, out = [t0], [c.copy()]
    t = t0
    for step in range(1, n_steps + 1):
        H1 = np.asarray(hamiltonian(t + (0.5 - r) * dt), dtype=complex)
        H2 = np.asarray(hamiltonian(t + (0.5 + r) * dt), dtype=complex)
        Heff = 0.5 * (H1 + H2) - 1j * (np.sqrt(3.0) * dt / 12.0) * (H2 @ H1 - H1 @ H2)
        c = expm_hermitian(Heff, dt) @ c
        t = t0 + step * dt
        if step % record_every == 0 or step == n_steps:
            times.append(t)
            out.append(c.copy())
    return np.array(times), np.array(out)


def landau_zener_probability(coupling, slope_difference, velocity):
    """Probability of staying on the diabatic state after one linear sweep."""
    if not (coupling >= 0 and slope_difference > 0 and velocity > 0):
        raise ConfigError("Landau-Zener formula needs positive slope difference and speed")
    return float(np.exp(-2.0 * np.pi * coupling**2 / (velocity * slope_difference)))
