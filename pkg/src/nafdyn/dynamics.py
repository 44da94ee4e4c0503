"""Trajectory propagation for the non-adiabatic field method and its baselines.

Trajectories are advanced in batches: every array in a
:class:`TrajectoryBatch` carries a leading trajectory axis, and a single
trajectory is simply a batch of one.  Electronic variables are kept in the
adiabatic basis of the current nuclear configuration.
"""
from dataclasses import dataclass, fields, replace
from typing import Optional

import numpy as np

from . import sampling
from .adiabatic import DEGENERACY_THRESHOLD, coupling_matrix, diagonalize, gaps
from .errors import ConfigError
from .estimators import electronic_weight0

HALVING_LIMIT = 25
# total retries one trajectory may spend inside a single top-level step
RETRY_BUDGET = 4 * HALVING_LIMIT
RESCALE_RTOL = 1e-12
STOCHASTIC_STREAM = 1
HOP_STREAM = 2


@dataclass(frozen=True)
class Method:
    name: str
    payload: str          # cps | amplitudes | kernel
    force: str            # single | mean_field
    selection: Optional[str]  # dominant | stochastic | hop | None
    nonadiabatic_force: bool
    final_rescale: bool
    estimator: str        # cps | amplitudes | fssh | kernel
    gamma: Optional[float] = None
    electronic: str = "diabatic_transform"
    hard_wall: bool = False

    @property
    def switching(self):
        return self.selection is not None


_METHODS = {
    "naf": ("cps", "single", "dominant", True, True, "cps"),
    "naf_s": ("cps", "single", "stochastic", True, True, "cps"),
    "naf_ehrenfest": ("amplitudes", "single", "dominant", True, True, "amplitudes"),
    "naf_gdtwa": ("kernel", "single", "dominant", True, True, "kernel"),
    "gdtwa": ("kernel", "mean_field", None, True, False, "kernel"),
    "mean_field_cps": ("cps", "mean_field", None, True, False, "cps"),
    "ehrenfest": ("amplitudes", "mean_field", None, True, False, "amplitudes"),
    "fssh": ("amplitudes", "single", "hop", False, False, "fssh"),
    "fs_naf": ("amplitudes", "single", "hop", True, True, "fssh"),
}
METHOD_NAMES = tuple(_METHODS)
HARD_WALL_METHODS = ("mean_field_cps", "gdtwa", "ehrenfest")
ELECTRONIC_VARIANTS = ("diabatic_transform", "adiabatic_direct")


def make_method(name, F=None, gamma=None, electronic="diabatic_transform", hard_wall=False):
    if name not in _METHODS:
        raise ConfigError(f"unknown method {name!r}; choose from {', '.join(METHOD_NAMES)}")
    if electronic not in ELECTRONIC_VARIANTS:
        raise ConfigError(f"unknown electronic propagation {electronic!r}")
    if hard_wall and name not in HARD_WALL_METHODS:
        raise ConfigError(f"the hard wall is only meant for mean-field methods "
                          f"({', '.join(HARD_WALL_METHODS)}); {name} keeps the energy "
                          f"constraint and never needs it")
    payload = _METHODS[name][0]
    if payload == "cps":
        if gamma is None:
            if F is None:
                raise ConfigError("gamma default needs the number of states")
            gamma = float(sampling.default_gamma(F))
        if F is not None and not gamma > -1.0 / F:
            raise ConfigError(f"gamma must exceed -1/F = {-1.0 / F:.6g}")
    elif gamma is not None:
        raise ConfigError(f"{name} does not use gamma")
    return Method(name, *_METHODS[name], gamma=gamma, electronic=electronic, hard_wall=hard_wall)


@dataclass
class TrajectoryBatch:
    index: np.ndarray
    R: np.ndarray
    P: np.ndarray
    j: np.ndarray
    H0: np.ndarray
    w0: np.ndarray
    E: np.ndarray
    T: np.ndarray
    force: np.ndarray
    failed: np.ndarray
    draws: np.ndarray
    g: Optional[np.ndarray] = None
    Gamma: Optional[np.ndarray] = None
    c: Optional[np.ndarray] = None
    K: Optional[np.ndarray] = None
    t: float = 0.0
    seed: int = 0

    def __len__(self):
        return len(self.index)

    def _arrays(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, np.ndarray):
                yield f.name, value

    def take(self, mask):
        return replace(self, **{name: value[mask].copy() for name, value in self._arrays()})

    def put(self, mask, other):
        for name, value in self._arrays():
            value[mask] = getattr(other, name)

    def copy(self):
        return replace(self, **{name: value.copy() for name, value in self._arrays()})


@dataclass
class StepEvents:
    switched: np.ndarray
    frustrated: np.ndarray
    halved: np.ndarray
    reflected: np.ndarray

    @classmethod
    def empty(cls, n):
        return cls(*(np.zeros(n, dtype=bool) for _ in range(4)))

    def merge(self, mask, other):
        for f in fields(self):
            getattr(self, f.name)[mask] |= getattr(other, f.name)

    def names(self, i):
        labels = {"switched": "switch accepted", "frustrated": "switch frustrated",
                  "halved": "substep halving", "reflected": "hard-wall reflection"}
        return [labels[f.name] for f in fields(self) if getattr(self, f.name)[i]]


@dataclass
class StepOutcome:
    state: TrajectoryBatch
    events: StepEvents


# ---------------------------------------------------------------------------
# building blocks


def expm_hermitian(H, dt):
    """exp(-i dt H) for a stack of Hermitian matrices."""
    H = np.asarray(H)
    if np.max(np.abs(H - np.conj(np.swapaxes(H, -1, -2))), initial=0.0) > 1e-10 * max(1.0, np.max(np.abs(H))):
        raise ValueError("propagator input is not Hermitian")
    if H.shape[-1] == 2:
        a0 = 0.5 * (H[..., 0, 0] + H[..., 1, 1]).real
        az = 0.5 * (H[..., 0, 0] - H[..., 1, 1]).real
        ax, ay = H[..., 0, 1].real, -H[..., 0, 1].imag
        r = np.sqrt(ax * ax + ay * ay + az * az)
        cs, sn = np.cos(r * dt), np.sinc(r * dt / np.pi) * dt  # sin(r dt) / r
        U = np.empty(H.shape, dtype=complex)
        U[..., 0, 0] = cs - 1j * sn * az
        U[..., 1, 1] = cs + 1j * sn * az
        U[..., 0, 1] = -1j * sn * (ax - 1j * ay)
        U[..., 1, 0] = -1j * sn * (ax + 1j * ay)
        return U * np.exp(-1j * dt * a0)[..., None, None]
    w, Q = np.linalg.eigh(H)
    return (Q * np.exp(-1j * dt * w)[..., None, :]) @ np.conj(np.swapaxes(Q, -1, -2))


def electronic_step(state, U):
    """Apply the one-step electronic propagator U to every payload present."""
    Uh = np.conj(np.swapaxes(U, -1, -2))
    out = {}
    if state.g is not None:
        out["g"] = np.einsum("...nm,...m->...n", U, state.g)
    if state.Gamma is not None:
        out["Gamma"] = U @ state.Gamma @ Uh
    if state.c is not None:
        out["c"] = np.einsum("...nm,...m->...n", U, state.c)
    if state.K is not None:
        out["K"] = U @ state.K @ Uh
    return out


def _diagonal_transform(state, S, phase):
    """Payload update D S x (and D S X S^T D*) with real S and diagonal D."""
    out = {}
    St = np.swapaxes(S, -1, -2)
    if state.g is not None:
        out["g"] = phase * np.einsum("...nm,...m->...n", S, state.g)
    if state.c is not None:
        out["c"] = phase * np.einsum("...nm,...m->...n", S, state.c)
    for name in ("Gamma", "K"):
        X = getattr(state, name)
        if X is not None:
            out[name] = phase[..., :, None] * (S @ X @ St) * np.conj(phase)[..., None, :]
    return out


def effective_hamiltonian(E, vd):
    F = E.shape[-1]
    return E[..., :, None] * np.eye(F) - 1j * vd


def weight_matrix(method, state):
    """Complex density-like matrix that weights the forces."""
    if method.payload == "cps":
        g = state.g
        return 0.5 * g[:, :, None] * np.conj(g)[:, None, :] - state.Gamma
    if method.payload == "amplitudes":
        return state.c[:, :, None] * np.conj(state.c)[:, None, :]
    return state.K


def force_assembly(model, R, T, rho, mode, j=None, nonadiabatic=True):
    """Nuclear force from the adiabatic weights rho (batch, F, F).

    ``mode`` is "mean_field" (population-weighted gradients) or "single"
    (gradient of state ``j``).  The off-diagonal part enters through the
    energy-difference-weighted couplings unless ``nonadiabatic`` is False.
    """
    W = np.array(rho.real, dtype=float)
    B, F = W.shape[0], W.shape[-1]
    idx = np.arange(F)
    if mode == "single":
        if nonadiabatic:
            W[:, idx, idx] = 0.0
        else:
            W[:] = 0.0
        W[np.arange(B), j, j] = 1.0
    elif not nonadiabatic:
        W = W * np.eye(F)
    W = 0.5 * (W + np.swapaxes(W, -1, -2))
    return -model.contract_gradient(R, T @ W @ np.swapaxes(T, -1, -2))


def select_force_state(populations, j, H0, E, KE, tol=None):
    """Dominant-population switching with the energy feasibility check.

    Returns (new_j, accepted, frustrated).
    """
    populations = np.asarray(populations, dtype=float)
    j = np.asarray(j)
    B = len(j)
    rows = np.arange(B)
    best = populations.argmax(axis=-1)
    keep = populations[rows, j] >= populations[rows, best]
    cand = np.where(keep, j, best)
    return _feasible_switch(cand, j, H0, E, KE, tol)


def _feasible_switch(cand, j, H0, E, KE, tol=None):
    rows = np.arange(len(j))
    H0 = np.asarray(H0, dtype=float)
    tol = RESCALE_RTOL * np.abs(H0) if tol is None else tol
    switching = cand != j
    target = KE + E[rows, j] - E[rows, cand]
    ok = (target >= -tol) & (H0 - E[rows, cand] >= -tol) & ~((KE == 0) & (target > tol))
    accepted = switching & ok
    frustrated = switching & ~ok
    return np.where(accepted, cand, j), accepted, frustrated


def kinetic_energy(P, masses):
    return 0.5 * np.sum(P * P / masses, axis=-1)


def rescale_to_energy(P, masses, target, tol=0.0):
    """Scale momenta along themselves to the kinetic energy ``target``.

    Returns (P', frustrated).  Targets within ``tol`` below zero clamp to zero.
    """
    P = np.asarray(P, dtype=float)
    target = np.asarray(target, dtype=float)
    KE = kinetic_energy(P, masses)
    frustrated = (target < -tol) | ((KE == 0) & (target > tol))
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(KE > 0, np.sqrt(np.maximum(target, 0.0) / np.where(KE > 0, KE, 1.0)), 1.0)
    factor = np.where(frustrated, 1.0, factor)
    return P * factor[..., None], frustrated


def rescale_along(P, masses, direction, delta_E):
    """Change P by lambda * direction so the kinetic energy drops by delta_E,
    taking the root of smaller magnitude.  Returns (P', frustrated)."""
    P = np.asarray(P, dtype=float)
    d = np.asarray(direction, dtype=float)
    a = 0.5 * np.sum(d * d / masses, axis=-1)
    b = np.sum(d * P / masses, axis=-1)
    c = np.asarray(delta_E, dtype=float)
    disc = b * b - 4.0 * a * c
    frustrated = (disc < 0) | (a == 0) & (c != 0)
    root = np.sqrt(np.maximum(disc, 0.0))
    q = -0.5 * (b + np.where(b >= 0, root, -root))
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = np.where(q != 0, c / np.where(q != 0, q, 1.0), 0.0)
    lam = np.where(frustrated, 0.0, lam)
    return P + lam[..., None] * d, frustrated


def hop_probabilities(c, j, vd, dt):
    """Fewest-switches probabilities out of the active state, capped at one."""
    B, F = c.shape
    rows = np.arange(B)
    cj = c[rows, j]
    num = 2.0 * dt * np.real(c * np.conj(cj)[:, None] * vd[rows, j, :])
    pop = np.abs(cj) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        prob = np.where(pop[:, None] > 0, num / pop[:, None], 0.0)
    prob = np.clip(prob, 0.0, 1.0)
    prob[rows, j] = 0.0
    return prob


def draw_hops(prob, u):
    """Target state from cumulative intervals, or -1 for no hop."""
    cum = np.cumsum(prob, axis=-1)
    hit = u[:, None] < cum
    target = np.where(hit.any(axis=-1), hit.argmax(axis=-1), -1)
    return target


# ---------------------------------------------------------------------------
# initialization


def initialize(model, method, indices, seed, occupation=None, R=None, P=None):
    """Sample initial conditions for trajectories ``indices``.

    ``occupation`` is ``(state, representation)`` and defaults to the model's.
    Explicit ``R``/``P`` (shape (len(indices), N)) bypass nuclear sampling.
    """
    indices = np.asarray(indices, dtype=np.int64)
    B, F, N = len(indices), model.F, model.N
    jocc, rep = model.occupation if occupation is None else occupation
    Rs = np.empty((B, N))
    Ps = np.empty((B, N))
    rngs = [sampling.trajectory_rng(seed, i) for i in indices]
    for b, rng in enumerate(rngs):
        if R is None:
            nuc = sampling.sample_nuclear(model, rng)
            Rs[b], Ps[b] = nuc.R, nuc.P
    if R is not None:
        Rs[:] = R
        Ps[:] = P
    E, T = diagonalize(model.potential(Rs))
    w0 = np.ones(B)
    payload = {}
    if method.payload == "cps":
        g = np.empty((B, F), dtype=complex)
        Gam = np.empty((B, F, F), dtype=complex)
        for b, rng in enumerate(rngs):
            init = sampling.sample_electronic_cps(F, method.gamma, jocc, rep, T[b], rng, target="adiabatic")
            g[b], Gam[b] = init.g, init.Gamma
            w0[b] = electronic_weight0(init.g0, jocc, method.gamma, F)
        payload = dict(g=g, Gamma=Gam)
    elif method.payload == "kernel":
        K = np.empty((B, F, F), dtype=complex)
        for b, rng in enumerate(rngs):
            K0 = sampling.sample_gdtwa(F, jocc, rng)
            K[b] = T[b].T @ K0 @ T[b] if rep == "diabatic" else K0
        payload = dict(K=K)
    else:
        c = np.zeros((B, F), dtype=complex)
        if method.selection == "hop":
            j0 = np.empty(B, dtype=np.int64)
            for b, rng in enumerate(rngs):
                c[b], j0[b] = sampling.sample_fssh_initial(F, jocc, rep, T[b], rng)
        elif rep == "diabatic":
            c[:] = T[:, jocc, :]
        else:
            c[:, jocc] = 1.0
        payload = dict(c=c)
    state = TrajectoryBatch(index=indices, R=Rs, P=Ps, j=np.zeros(B, dtype=np.int64), H0=np.zeros(B),
                            w0=w0, E=E, T=T, force=np.zeros((B, N)), failed=np.zeros(B, dtype=bool),
                            draws=np.zeros(B, dtype=np.uint64), seed=int(seed), **payload)
    rho = weight_matrix(method, state)
    if method.selection == "hop":
        state.j = j0
    else:
        state.j = np.real(np.diagonal(rho, axis1=-2, axis2=-1)).argmax(axis=-1)
    state.failed |= gaps(E) < DEGENERACY_THRESHOLD if F > 1 else False
    state.H0 = total_energy(model, method, state)
    state.force = _state_force(model, method, state)
    return state


def total_energy(model, method, state):
    """Conserved energy: single-surface for switching methods, mean field otherwise."""
    KE = kinetic_energy(state.P, model.masses)
    rows = np.arange(len(state))
    if method.switching:
        return KE + state.E[rows, state.j]
    rho = weight_matrix(method, state)
    return KE + np.sum(np.real(np.diagonal(rho, axis1=-2, axis2=-1)) * state.E, axis=-1)


def _state_force(model, method, state):
    return force_assembly(model, state.R, state.T, weight_matrix(method, state), method.force,
                          state.j, method.nonadiabatic_force)


# ---------------------------------------------------------------------------
# time stepping


def _propagate_electrons(model, method, state, R_new, v, dt, E_new, T_new):
    """Endpoint propagator over the step.  Mean-field methods have no rescale
    to restore the energy, so they split the step symmetrically between the
    old and new geometry, which makes the energy error second order."""
    need_vd = method.electronic == "adiabatic_direct" or method.selection == "hop"
    symmetric = method.force == "mean_field"
    vd = None
    if need_vd:
        vd = coupling_matrix(E_new, T_new, model.gradient_along(R_new, v))
    if method.electronic == "adiabatic_direct":
        if symmetric:
            vd_old = coupling_matrix(state.E, state.T, model.gradient_along(state.R, v))
            U = (expm_hermitian(effective_hamiltonian(E_new, vd), 0.5 * dt)
                 @ expm_hermitian(effective_hamiltonian(state.E, vd_old), 0.5 * dt))
            return electronic_step(state, U), vd
        return electronic_step(state, expm_hermitian(effective_hamiltonian(E_new, vd), dt)), vd
    S = np.swapaxes(T_new, -1, -2) @ state.T
    if symmetric:
        F = state.E.shape[-1]
        half = replace(state, **_diagonal_transform(state, np.eye(F), np.exp(-0.5j * dt * state.E)))
        return _diagonal_transform(half, S, np.exp(-0.5j * dt * E_new)), vd
    return _diagonal_transform(state, S, np.exp(-1j * dt * E_new)), vd


def _attempt(model, method, state, dt):
    """One step of size dt.  Returns (new state, retry mask, events)."""
    B = len(state)
    rows = np.arange(B)
    M = model.masses
    ev = StepEvents.empty(B)
    P_half = state.P + 0.5 * dt * state.force
    R_new = state.R + dt * P_half / M
    E_new, T_new = diagonalize(model.potential(R_new), state.T)
    bad = ~np.all(np.isfinite(E_new), axis=-1)
    if model.F > 1:
        bad |= gaps(E_new) < DEGENERACY_THRESHOLD
    payload, vd = _propagate_electrons(model, method, state, R_new, P_half / M, dt, E_new, T_new)
    new = replace(state, R=R_new, P=P_half, E=E_new, T=T_new, **payload)
    new.draws = state.draws.copy()
    j = state.j
    tol = RESCALE_RTOL * np.abs(state.H0)

    if method.selection in ("dominant", "stochastic"):
        pops = np.real(np.diagonal(weight_matrix(method, new), axis1=-2, axis2=-1))
        KE = kinetic_energy(P_half, M)
        if method.selection == "dominant":
            j_new, accepted, frustrated = select_force_state(pops, j, state.H0, E_new, KE, tol)
        else:
            u = sampling.counter_uniform(state.seed, state.index, new.draws, STOCHASTIC_STREAM)
            new.draws = new.draws + np.uint64(1)
            weights = np.abs(pops)
            cum = np.cumsum(weights, axis=-1)
            cand = np.minimum((u[:, None] * cum[:, -1:] >= cum).sum(axis=-1), model.F - 1)
            j_new, accepted, frustrated = _feasible_switch(cand, j, state.H0, E_new, KE, tol)
        if np.any(accepted):
            target = KE + E_new[rows, j] - E_new[rows, j_new]
            P_acc, _ = rescale_to_energy(P_half[accepted], M, target[accepted], tol[accepted])
            new.P = P_half.copy()
            new.P[accepted] = P_acc
        new.j = j_new
        ev.switched, ev.frustrated = accepted, frustrated
    elif method.selection == "hop":
        u = sampling.counter_uniform(state.seed, state.index, new.draws, HOP_STREAM)
        new.draws = new.draws + np.uint64(1)
        target = draw_hops(hop_probabilities(new.c, j, vd, dt), u)
        attempt = (target >= 0) & ~bad
        j_new = j.copy()
        if np.any(attempt):
            sub = np.flatnonzero(attempt)
            k = target[sub]
            jj = j[sub]
            D = coupling_matrix(E_new[sub], T_new[sub], model.gradient(R_new[sub]))
            direction = D[np.arange(len(sub)), :, jj, k]
            P_sub, frus = rescale_along(P_half[sub], M, direction, E_new[sub, k] - E_new[sub, jj])
            ok = ~frus
            new.P = P_half.copy()
            new.P[sub[ok]] = P_sub[ok]
            j_new[sub[ok]] = k[ok]
            ev.switched[sub[ok]] = True
            ev.frustrated[sub[~ok]] = True
        new.j = j_new

    new.force = _state_force(model, method, new)
    new.P = new.P + 0.5 * dt * new.force
    retry = np.zeros(B, dtype=bool)
    if method.final_rescale:
        target = state.H0 - E_new[rows, new.j]
        P_fin, frus = rescale_to_energy(new.P, M, target, tol)
        retry = frus & ~bad
        new.P = np.where(frus[:, None], new.P, P_fin)
    if method.hard_wall and model.hard_wall is not None:
        hit = model.hard_wall & (new.R <= 0) & (new.P <= 0)
        new.P = np.where(hit, -new.P, new.P)
        ev.reflected = hit.any(axis=-1)
    bad |= ~np.all(np.isfinite(new.P), axis=-1)
    new.failed = state.failed | bad
    new.t = state.t + dt
    return new, retry, ev


def _advance(model, method, state, dt, depth, retries):
    new, retry, ev = _attempt(model, method, state, dt)
    if np.any(retry):
        ev.halved |= retry
        retries[retry] += 1
        sub = state.take(retry)
        sub_retries = retries[retry]
        exhausted = sub_retries > RETRY_BUDGET
        if depth >= HALVING_LIMIT or np.all(exhausted):
            sub.failed[:] = True
            sub.t = new.t
        else:
            # trajectories that keep retrying at a turning point would otherwise grow an exponential tree
            sub.failed |= exhausted
            sub, ev1 = _advance_live(model, method, sub, 0.5 * dt, depth + 1, sub_retries)
            # a failure in the first half ends that trajectory, so the second half skips it
            sub, ev2 = _advance_live(model, method, sub, 0.5 * dt, depth + 1, sub_retries)
            ev1.merge(slice(None), ev2)
            ev.merge(retry, ev1)
        retries[retry] = sub_retries
        new.put(retry, sub)
    return new, ev


def _advance_live(model, method, state, dt, depth, retries):
    live = ~state.failed
    if np.all(live):
        return _advance(model, method, state, dt, depth, retries)
    new = state.copy()
    new.t = state.t + dt
    ev = StepEvents.empty(len(state))
    if np.any(live):
        live_retries = retries[live]
        sub, sub_ev = _advance(model, method, state.take(live), dt, depth, live_retries)
        retries[live] = live_retries
        new.put(live, sub)
        ev.merge(live, sub_ev)
    return new, ev


def advance_trajectory(state, model, method, dt):
    """Advance every live trajectory of ``state`` by dt; failed ones stay frozen."""
    if not dt > 0:
        raise ConfigError("time step must be positive")
    return StepOutcome(*_advance_live(model, method, state, dt, 0, np.zeros(len(state), dtype=int)))


def advance_on_path(state, model, method, R_next, P_mid, dt):
    """Electronic step along a prescribed nuclear path (no forces, no switching)."""
    R_next = np.broadcast_to(np.asarray(R_next, dtype=float), state.R.shape)
    P_mid = np.broadcast_to(np.asarray(P_mid, dtype=float), state.P.shape)
    E_new, T_new = diagonalize(model.potential(R_next), state.T)
    payload, _ = _propagate_electrons(model, method, state, R_next, P_mid / model.masses, dt, E_new, T_new)
    return replace(state, R=R_next.copy(), P=P_mid.copy(), E=E_new, T=T_new, t=state.t + dt, **payload)


# ---------------------------------------------------------------------------
# mean-field dynamics written directly in the diabatic basis


def ehrenfest_diabatic_force(model, R, c):
    rho = np.real(c[:, :, None] * np.conj(c)[:, None, :])
    return -model.contract_gradient(R, rho)


def ehrenfest_diabatic_step(model, R, P, c, dt):
    """Velocity-Verlet nuclei, electrons split symmetrically between the old and
    new geometry, diabatic amplitudes c."""
    P_half = P + 0.5 * dt * ehrenfest_diabatic_force(model, R, c)
    R_new = R + dt * P_half / model.masses
    c_new = c
    for where in (R, R_new):
        w, Q = np.linalg.eigh(model.potential(where))
        c_new = np.einsum("bnk,bk->bn", Q, np.exp(-0.5j * dt * w) * np.einsum("bnk,bn->bk", Q, c_new))
    P_new = P_half + 0.5 * dt * ehrenfest_diabatic_force(model, R_new, c_new)
    return R_new, P_new, c_new
