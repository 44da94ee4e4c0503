"""Diabatic model Hamiltonians.

Every model is a :class:`ModelDefinition` whose ``potential`` and ``gradient``
accept nuclear coordinates of shape ``(..., N)`` and return arrays of shape
``(..., F, F)`` and ``(..., N, F, F)``.  Everything is in atomic units; mass
weighted coordinates are used for harmonic baths and vibronic models.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import units
from .errors import ConfigError


@dataclass(frozen=True)
class BathModes:
    frequencies: np.ndarray
    couplings: np.ndarray

    @property
    def count(self):
        return len(self.frequencies)


@dataclass(frozen=True)
class NuclearInitSpec:
    """Independent Gaussian Wigner distribution for each nuclear DOF."""

    kind: str
    mean_R: np.ndarray
    sigma_R: np.ndarray
    mean_P: np.ndarray
    sigma_P: np.ndarray
    positive: bool = False


@dataclass(frozen=True, eq=False)
class ModelDefinition:
    label: str
    F: int
    N: int
    masses: np.ndarray
    potential: Callable
    gradient: Callable
    hard_wall: Optional[np.ndarray] = None
    contract: Optional[Callable] = None
    directional: Optional[Callable] = None
    nuclear_init: Optional[NuclearInitSpec] = None
    occupation: tuple = (0, "diabatic")
    dimensionless_scale: Optional[np.ndarray] = None
    site_blocks: Optional[tuple] = None
    interaction_region: Optional[float] = None
    defaults: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def contract_gradient(self, R, W):
        """Return sum_nm dV_nm/dR_J W_mn for a symmetric weight matrix W."""
        if self.contract is not None:
            return self.contract(R, W)
        return np.einsum("...jnm,...nm->...j", self.gradient(R), W)

    def gradient_along(self, R, v):
        """Return sum_J v_J dV/dR_J, shape (..., F, F)."""
        if self.directional is not None:
            return self.directional(R, v)
        return np.einsum("...j,...jnm->...nm", v, self.gradient(R))


def _check_R(model, R):
    R = np.asarray(R, dtype=float)
    if R.shape[-1:] != (model.N,):
        raise ConfigError(f"{model.label}: expected {model.N} nuclear coordinates, got shape {R.shape}")
    return R


def evaluate_potential(model, R):
    return model.potential(_check_R(model, R))


def evaluate_gradient(model, R):
    return model.gradient(_check_R(model, R))


def discretize_spectral_density(kind, n_modes, *, omega_c, alpha=None, reorganization=None):
    """Discrete harmonic bath for an Ohmic (Kondo ``alpha``) or Debye
    (reorganization energy ``reorganization``) spectral density."""
    n_modes = int(n_modes)
    if n_modes < 1:
        raise ConfigError("bath needs at least one mode")
    if not omega_c > 0:
        raise ConfigError("cut-off frequency must be positive")
    j = np.arange(1, n_modes + 1)
    if kind == "ohmic":
        if alpha is None or not alpha > 0:
            raise ConfigError("ohmic bath needs alpha > 0")
        w = -omega_c * np.log(1.0 - j / (n_modes + 1.0))
        c = w * np.sqrt(alpha * omega_c / (n_modes + 1.0))
    elif kind == "debye":
        if reorganization is None or not reorganization > 0:
            raise ConfigError("debye bath needs a positive reorganization energy")
        # the closed form runs from high to low frequency; store ascending
        w = omega_c * np.tan(np.pi / 2 - np.pi * j / (2.0 * (n_modes + 1)))[::-1]
        c = w * np.sqrt(2.0 * reorganization / (n_modes + 1.0))
    else:
        raise ConfigError(f"unknown spectral density {kind!r}")
    return BathModes(w, c)


def quantum_corrector(beta, omega):
    x = 0.5 * beta * np.asarray(omega, dtype=float)
    return x / np.tanh(x)


def thermal_wigner(omega, beta):
    """Wigner widths of harmonic oscillators (unit mass) at inverse temperature beta."""
    if not beta > 0:
        raise ConfigError("beta must be positive")
    omega = np.asarray(omega, dtype=float)
    q = quantum_corrector(beta, omega)
    zeros = np.zeros_like(omega)
    return NuclearInitSpec("thermal", zeros, np.sqrt(q / (beta * omega**2)), zeros, np.sqrt(q / beta))


def vacuum_wigner(omega):
    omega = np.asarray(omega, dtype=float)
    zeros = np.zeros_like(omega)
    return NuclearInitSpec("vacuum", zeros, np.sqrt(0.5 / omega), zeros, np.sqrt(0.5 * omega))


def wavepacket_wigner(R0, P0, alpha, positive=False):
    one = np.ones(1)
    return NuclearInitSpec("wavepacket", R0 * one, np.sqrt(0.5 / alpha) * one,
                           P0 * one, np.sqrt(0.5 * alpha) * one, positive)


# ---------------------------------------------------------------------------
# model families


def linear_vibronic_model(label, H0, K, omega, masses=None, **extra):
    """V(R) = H0 + sum_J R_J K_J + 1/2 sum_J omega_J^2 R_J^2 (identity)."""
    H0 = np.asarray(H0, dtype=float)
    K = np.asarray(K, dtype=float)
    omega = np.asarray(omega, dtype=float)
    F = H0.shape[0]
    N = K.shape[0]
    w2 = omega**2
    Kflat = K.reshape(N, F * F)
    eye = np.eye(F)
    diag = np.arange(F)

    def potential(R):
        R = np.asarray(R, dtype=float)
        V = (R @ Kflat).reshape(R.shape[:-1] + (F, F)) + H0
        V[..., diag, diag] += 0.5 * np.sum(w2 * R**2, axis=-1)[..., None]
        return V

    def gradient(R):
        R = np.asarray(R, dtype=float)
        G = np.broadcast_to(K, R.shape[:-1] + K.shape).copy()
        G[..., diag, diag] += (w2 * R)[..., None]
        return G

    def contract(R, W):
        W = np.asarray(W)
        Wf = W.reshape(W.shape[:-2] + (F * F,))
        trace = np.trace(W, axis1=-2, axis2=-1)
        return Wf @ Kflat.T + w2 * np.asarray(R) * trace[..., None]

    def directional(R, v):
        v = np.asarray(v)
        G = (v @ Kflat).reshape(v.shape[:-1] + (F, F))
        return G + np.sum(w2 * np.asarray(R) * v, axis=-1)[..., None, None] * eye

    if masses is None:
        masses = np.ones(N)
    return ModelDefinition(label=label, F=F, N=N, masses=np.asarray(masses, dtype=float),
                           potential=potential, gradient=gradient, contract=contract,
                           directional=directional, **extra)


def one_dimensional_model(label, matrix, derivative, F, mass, **extra):
    """Model with a single nuclear DOF; ``matrix(x)`` and ``derivative(x)``
    map an array of positions to (..., F, F) arrays."""

    def potential(R):
        return matrix(np.asarray(R, dtype=float)[..., 0])

    def gradient(R):
        return derivative(np.asarray(R, dtype=float)[..., 0])[..., None, :, :]

    def contract(R, W):
        return np.sum(derivative(np.asarray(R, dtype=float)[..., 0]) * W, axis=(-2, -1))[..., None]

    def directional(R, v):
        return derivative(np.asarray(R, dtype=float)[..., 0]) * np.asarray(v)[..., :1, None]

    return ModelDefinition(label=label, F=F, N=1, masses=np.array([float(mass)]),
                           potential=potential, gradient=gradient, contract=contract,
                           directional=directional, **extra)


def _pack(*rows):
    """Stack nested lists of equally shaped arrays into (..., F, F)."""
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


def constant_model(V, label="constant"):
    """Frozen-nuclei test system: V does not depend on the single coordinate."""
    V = np.asarray(V, dtype=float)
    F = V.shape[0]

    def matrix(x):
        return np.broadcast_to(V, np.shape(x) + (F, F)).copy()

    def derivative(x):
        return np.zeros(np.shape(x) + (F, F))

    return one_dimensional_model(label, matrix, derivative, F, 1.0)


def harmonic_surfaces(k, offsets, mass=1.0, label="harmonic_surfaces"):
    """Uncoupled parallel harmonic surfaces 1/2 k R^2 + offset_n."""
    offsets = np.asarray(offsets, dtype=float)
    F = len(offsets)

    def matrix(x):
        V = np.zeros(np.shape(x) + (F, F))
        V[..., np.arange(F), np.arange(F)] = 0.5 * k * np.asarray(x)[..., None] ** 2 + offsets
        return V

    def derivative(x):
        D = np.zeros(np.shape(x) + (F, F))
        D[..., np.arange(F), np.arange(F)] = k * np.asarray(x)[..., None]
        return D

    return one_dimensional_model(label, matrix, derivative, F, mass)


def linear_crossing(slope, coupling, mass=1.0, label="linear_crossing"):
    """Two diabats +-slope*R/2 with constant coupling (slope difference = slope)."""

    def matrix(x):
        x = np.asarray(x, dtype=float)
        h = 0.5 * slope * x
        c = np.full_like(x, coupling)
        return _pack((h, c), (c, -h))

    def derivative(x):
        x = np.asarray(x, dtype=float)
        h = np.full_like(x, 0.5 * slope)
        z = np.zeros_like(x)
        return _pack((h, z), (z, -h))

    return one_dimensional_model(label, matrix, derivative, 2, mass)


# ---------------------------------------------------------------------------
# benchmark models

def _require(params, key):
    if key not in params:
        raise ConfigError(f"missing required model parameter {key!r}")
    return params[key]


def spin_boson(alpha=0.1, omega_c=1.0, epsilon=1.0, delta=1.0, n_modes=300, beta=5.0):
    bath = discretize_spectral_density("ohmic", n_modes, omega_c=omega_c, alpha=alpha)
    sz = np.diag([1.0, -1.0])
    H0 = epsilon * sz + delta * np.array([[0.0, 1.0], [1.0, 0.0]])
    K = bath.couplings[:, None, None] * sz
    return linear_vibronic_model(
        "spin_boson", H0, K, bath.frequencies,
        nuclear_init=thermal_wigner(bath.frequencies, beta),
        occupation=(0, "diabatic"),
        defaults={"dt": 0.01, "n_traj": 100000, "t_final": 20.0},
        params=dict(alpha=alpha, omega_c=omega_c, epsilon=epsilon, delta=delta,
                    n_modes=n_modes, beta=beta))


def _site_bath_model(label, H_S, bath, beta, occupied, defaults, params):
    F = H_S.shape[0]
    nb = bath.count
    K = np.zeros((F * nb, F, F))
    for n in range(F):
        K[n * nb:(n + 1) * nb, n, n] = bath.couplings
    omega = np.tile(bath.frequencies, F)
    blocks = tuple(slice(n * nb, (n + 1) * nb) for n in range(F))
    return linear_vibronic_model(label, H_S, K, omega,
                                 nuclear_init=thermal_wigner(omega, beta),
                                 occupation=(occupied, "diabatic"), site_blocks=blocks,
                                 defaults=defaults, params=params)


FMO_HAMILTONIAN_CM = np.array([
    [12410, -87.7, 5.5, -5.9, 6.7, -13.7, -9.9],
    [-87.7, 12530, 30.8, 8.2, 0.7, 11.8, 4.3],
    [5.5, 30.8, 12210, -53.5, -2.2, -9.6, 6.0],
    [-5.9, 8.2, -53.5, 12320, -70.7, -17.0, -63.3],
    [6.7, 0.7, -2.2, -70.7, 12480, 81.1, -1.3],
    [-13.7, 11.8, -9.6, -17.0, 81.1, 12630, 39.7],
    [-9.9, 4.3, 6.0, -63.3, -1.3, 39.7, 12440],
])


def fmo7(n_modes=50, reorganization_cm=35.0, omega_c_cm=106.14, temperature=77.0):
    bath = discretize_spectral_density("debye", n_modes, omega_c=units.inv_cm(omega_c_cm),
                                       reorganization=units.inv_cm(reorganization_cm))
    if not temperature > 0:
        raise ConfigError("temperature must be positive")
    return _site_bath_model(
        "fmo7", units.inv_cm(FMO_HAMILTONIAN_CM), bath, units.beta_from_kelvin(temperature), 0,
        {"dt": units.fs(0.1), "n_traj": 100000, "t_final": units.fs(1000.0)},
        dict(n_modes=n_modes, reorganization_cm=reorganization_cm, omega_c_cm=omega_c_cm,
             temperature=temperature))


SINGLET_FISSION_EV = np.array([[0.2, -0.05, 0.0], [-0.05, 0.3, -0.05], [0.0, -0.05, 0.0]])


def singlet_fission(n_modes=200, reorganization_ev=0.1, omega_c_ev=0.18, temperature=300.0):
    bath = discretize_spectral_density("debye", n_modes, omega_c=units.ev(omega_c_ev),
                                       reorganization=units.ev(reorganization_ev))
    if not temperature > 0:
        raise ConfigError("temperature must be positive")
    return _site_bath_model(
        "singlet_fission", units.ev(SINGLET_FISSION_EV), bath,
        units.beta_from_kelvin(temperature), 0,
        {"dt": units.fs(0.001), "n_traj": 24000, "t_final": units.fs(200.0)},
        dict(n_modes=n_modes, reorganization_ev=reorganization_ev, omega_c_ev=omega_c_ev,
             temperature=temperature))


CAVITY_LEVELS = np.array([-0.6738, -0.2798, -0.1547])
CAVITY_DIPOLES = {(0, 1): -1.034, (1, 2): -2.536}


def cavity(levels=3, n_modes=400, length=236200.0, position=None, permittivity=1.0 / (4.0 * np.pi)):
    if levels not in (2, 3):
        raise ConfigError("cavity model has 2 or 3 atomic levels")
    n_modes = int(n_modes)
    if n_modes < 1:
        raise ConfigError("cavity needs at least one field mode")
    r0 = 0.5 * length if position is None else position
    j = np.arange(1, n_modes + 1)
    omega = j * np.pi * units.SPEED_OF_LIGHT / length
    lam = np.sqrt(2.0 / (permittivity * length)) * np.sin(j * np.pi * r0 / length)
    mu = np.zeros((levels, levels))
    for (n, m), value in CAVITY_DIPOLES.items():
        if m < levels:
            mu[n, m] = mu[m, n] = value
    K = (omega * lam)[:, None, None] * mu
    return linear_vibronic_model(
        f"cavity{levels}level", np.diag(CAVITY_LEVELS[:levels]), K, omega,
        nuclear_init=vacuum_wigner(omega), occupation=(levels - 1, "diabatic"),
        defaults={"dt": 0.1, "n_traj": 100000, "t_final": 3000.0},
        params=dict(n_modes=n_modes, length=length, position=r0, permittivity=permittivity))


PHOTODISSOCIATION = {
    1: dict(C=(0.0, 0.01, 0.006), D=(0.003, 0.004, 0.003), R=(5.0, 4.0, 6.0),
            beta=(0.65, 0.60, 0.65), A=(0.002, 0.002, 0.0), Rc=(3.40, 4.80, 0.00),
            a=(16.0, 16.0, 0.0), Re=2.9),
    2: dict(C=(0.0, 0.01, 0.02), D=(0.020, 0.010, 0.003), R=(4.5, 4.0, 4.4),
            beta=(0.65, 0.40, 0.65), A=(0.005, 0.0, 0.005), Rc=(3.66, 0.00, 3.34),
            a=(32.0, 0.0, 32.0), Re=3.3),
    3: dict(C=(0.02, 0.0, 0.02), D=(0.020, 0.020, 0.003), R=(4.0, 4.5, 6.0),
            beta=(0.40, 0.65, 0.65), A=(0.005, 0.0, 0.005), Rc=(3.40, 0.00, 4.97),
            a=(32.0, 0.0, 32.0), Re=2.1),
}
_PAIRS = ((0, 1), (1, 2), (2, 0))


def photodissociation(variant, mass=20000.0, omega=0.005):
    if variant not in PHOTODISSOCIATION:
        raise ConfigError(f"unknown photodissociation model {variant!r}")
    p = PHOTODISSOCIATION[variant]
    C, D, R0, b = (np.array(p[k]) for k in ("C", "D", "R", "beta"))

    def matrix(x):
        x = np.asarray(x, dtype=float)
        V = np.zeros(x.shape + (3, 3))
        e = np.exp(-b * (x[..., None] - R0))
        V[..., [0, 1, 2], [0, 1, 2]] = D * (1.0 - e) ** 2 + C
        for (i, k), A, Rc, a in zip(_PAIRS, p["A"], p["Rc"], p["a"]):
            if A:
                V[..., i, k] = V[..., k, i] = A * np.exp(-a * (x - Rc) ** 2)
        return V

    def derivative(x):
        x = np.asarray(x, dtype=float)
        G = np.zeros(x.shape + (3, 3))
        e = np.exp(-b * (x[..., None] - R0))
        G[..., [0, 1, 2], [0, 1, 2]] = 2.0 * D * b * e * (1.0 - e)
        for (i, k), A, Rc, a in zip(_PAIRS, p["A"], p["Rc"], p["a"]):
            if A:
                G[..., i, k] = G[..., k, i] = -2.0 * a * (x - Rc) * A * np.exp(-a * (x - Rc) ** 2)
        return G

    width = mass * omega
    init = NuclearInitSpec("morse_ground", np.array([p["Re"]]), np.array([np.sqrt(0.5 / width)]),
                           np.zeros(1), np.array([np.sqrt(0.5 * width)]), positive=True)
    return one_dimensional_model(
        f"photodissociation_{variant}", matrix, derivative, 3, mass,
        hard_wall=np.array([True]), nuclear_init=init, occupation=(0, "diabatic"),
        defaults={"dt": units.fs(0.01), "n_traj": 100000, "t_final": units.fs(200.0),
                  "momentum_damping": 0.05},
        params=dict(mass=mass, omega=omega))


def _scattering_defaults(mass, R0, region, p0):
    return {"dt": units.fs(0.01), "n_traj": 100000, "momentum_damping": 0.01,
            "t_final": 2.0 * mass * (abs(R0) + 2.0 * region) / abs(p0)}


def tully_sac(p0, A=0.01, B=1.6, C=0.005, D=1.0, mass=2000.0, r0=-3.8, width=1.0):
    def matrix(x):
        x = np.asarray(x, dtype=float)
        v11 = A * (1.0 - np.exp(-B * np.abs(x))) * np.sign(x)
        v12 = C * np.exp(-D * x**2)
        return _pack((v11, v12), (v12, -v11))

    def derivative(x):
        x = np.asarray(x, dtype=float)
        d11 = A * B * np.exp(-B * np.abs(x))
        d12 = -2.0 * C * D * x * np.exp(-D * x**2)
        return _pack((d11, d12), (d12, -d11))

    return one_dimensional_model(
        "tully_sac", matrix, derivative, 2, mass, nuclear_init=wavepacket_wigner(r0, p0, width),
        occupation=(0, "adiabatic"), interaction_region=3.0,
        defaults=_scattering_defaults(mass, r0, 3.0, p0),
        params=dict(p0=p0, A=A, B=B, C=C, D=D, mass=mass, r0=r0, width=width))


def tully_dac(p0, A=0.1, B=0.28, C=0.015, D=0.06, E0=0.05, mass=2000.0, r0=-10.0, width=1.0):
    def matrix(x):
        x = np.asarray(x, dtype=float)
        v12 = C * np.exp(-D * x**2)
        return _pack((np.zeros_like(x), v12), (v12, E0 - A * np.exp(-B * x**2)))

    def derivative(x):
        x = np.asarray(x, dtype=float)
        d12 = -2.0 * C * D * x * np.exp(-D * x**2)
        return _pack((np.zeros_like(x), d12), (d12, 2.0 * A * B * x * np.exp(-B * x**2)))

    return one_dimensional_model(
        "tully_dac", matrix, derivative, 2, mass, nuclear_init=wavepacket_wigner(r0, p0, width),
        occupation=(0, "adiabatic"), interaction_region=8.0,
        defaults=_scattering_defaults(mass, r0, 8.0, p0),
        params=dict(p0=p0, A=A, B=B, C=C, D=D, E0=E0, mass=mass, r0=r0, width=width))


def tully_ecr(p0, B=0.9, C=0.1, E0=-0.0006, mass=2000.0, r0=-13.0, width=1.0):
    def matrix(x):
        x = np.asarray(x, dtype=float)
        e = np.exp(-B * np.abs(x))
        v12 = C * np.where(x < 0, e, 2.0 - e)
        return _pack((np.full_like(x, E0), v12), (v12, np.full_like(x, -E0)))

    def derivative(x):
        x = np.asarray(x, dtype=float)
        z = np.zeros_like(x)
        d12 = C * B * np.exp(-B * np.abs(x))
        return _pack((z, d12), (d12, z))

    return one_dimensional_model(
        "tully_ecr", matrix, derivative, 2, mass, nuclear_init=wavepacket_wigner(r0, p0, width),
        occupation=(0, "adiabatic"), interaction_region=5.0,
        defaults=_scattering_defaults(mass, r0, 5.0, p0),
        params=dict(p0=p0, B=B, C=C, E0=E0, mass=mass, r0=r0, width=width))


def asym_sac(p0, A1=0.04, A2=0.01, B=1.0, C=0.005, D=1.0, Q=0.7, mass=1980.0, r0=-5.0,
             width=0.25):
    def matrix(x):
        x = np.asarray(x, dtype=float)
        t = np.tanh(B * x)
        v12 = C * np.exp(-D * (x + Q) ** 2)
        return _pack((A1 * (1.0 + t), v12), (v12, A2 * (1.0 - t)))

    def derivative(x):
        x = np.asarray(x, dtype=float)
        s = B / np.cosh(B * x) ** 2
        d12 = -2.0 * C * D * (x + Q) * np.exp(-D * (x + Q) ** 2)
        return _pack((A1 * s, d12), (d12, -A2 * s))

    return one_dimensional_model(
        "asym_sac", matrix, derivative, 2, mass, nuclear_init=wavepacket_wigner(r0, p0, width),
        occupation=(0, "adiabatic"), interaction_region=4.0,
        defaults=_scattering_defaults(mass, r0, 4.0, p0),
        params=dict(p0=p0, A1=A1, A2=A2, B=B, C=C, D=D, Q=Q, mass=mass, r0=r0, width=width))


def _lvcm(label, energies, omega, kappa, couplings, occupied, init):
    """kappa: {(mode, state): value}; couplings: {(mode, n, m): value}; all in eV."""
    omega = np.asarray(omega, dtype=float)
    F, N = len(energies), len(omega)
    K = np.zeros((N, F, F))
    for (k, n), value in kappa.items():
        K[k, n, n] = value
    for (k, n, m), value in couplings.items():
        K[k, n, m] = K[k, m, n] = value
    w = units.ev(omega)
    scale = np.sqrt(w)
    # dimensionless coordinate = sqrt(w) R, so each linear term picks up sqrt(w)
    K = units.ev(K) * scale[:, None, None]
    mean_bar, sigma_bar_R, sigma_bar_P = init(N)
    nuclear = NuclearInitSpec("vibronic", mean_bar / scale, sigma_bar_R / scale,
                              np.zeros(N), sigma_bar_P * scale)
    return linear_vibronic_model(
        label, np.diag(units.ev(np.asarray(energies, dtype=float))), K, w,
        nuclear_init=nuclear, occupation=(occupied, "diabatic"), dimensionless_scale=scale,
        defaults={"dt": units.fs(0.01), "n_traj": 100000, "t_final": units.fs(150.0)})


def _vibrational_ground(N):
    half = np.full(N, np.sqrt(0.5))
    return np.zeros(N), half, half


def lvcm_pyrazine3():
    return _lvcm("lvcm_pyrazine3", [3.94, 4.84], [0.126, 0.074, 0.118],
                 {(0, 0): 0.037, (1, 0): -0.105, (0, 1): -0.254, (1, 1): 0.149},
                 {(2, 0, 1): 0.262}, 1, _vibrational_ground)


PYRAZINE24_MODES = [
    # omega, kappa state 1, kappa state 2
    (0.0936, 0.0, 0.0), (0.074, -0.0964, 0.1194), (0.1273, 0.0470, 0.2012),
    (0.1568, 0.1594, 0.0484), (0.1347, 0.0308, -0.0308), (0.3431, 0.0782, -0.0782),
    (0.1157, 0.0261, -0.0261), (0.3242, 0.0717, -0.0717), (0.3621, 0.0780, -0.0780),
    (0.2673, 0.0560, -0.0560), (0.3052, 0.0625, -0.0625), (0.0968, 0.0188, -0.0188),
    (0.0589, 0.0112, -0.0112), (0.0400, 0.0069, -0.0069), (0.1726, 0.0265, -0.0265),
    (0.2863, 0.0433, -0.0433), (0.2484, 0.0361, -0.0361), (0.1536, 0.0210, -0.0210),
    (0.2105, 0.0281, -0.0281), (0.0778, 0.0102, -0.0102), (0.2294, 0.0284, -0.0284),
    (0.1915, 0.0196, -0.0196), (0.4000, 0.0306, -0.0306), (0.3810, 0.0269, -0.0269),
]


def lvcm_pyrazine24():
    kappa = {}
    for k, (_, k1, k2) in enumerate(PYRAZINE24_MODES):
        kappa[(k, 0)] = k1
        kappa[(k, 1)] = k2
    return _lvcm("lvcm_pyrazine24", [-0.4617, 0.4617], [m[0] for m in PYRAZINE24_MODES],
                 kappa, {(0, 0, 1): 0.1825}, 1, _vibrational_ground)


def lvcm_crco5():
    r = np.array([0.0, 14.3514])
    a = np.array([0.4501, 0.4586])

    def init(N):
        return r, a, 0.5 / a

    return _lvcm("lvcm_crco5", [0.0424, 0.0424, 0.4344], [0.0129, 0.0129],
                 {(1, 0): -0.0328, (1, 1): 0.0328},
                 {(0, 0, 1): 0.0328, (0, 1, 2): -0.0978, (1, 0, 2): -0.0978}, 1, init)


REGISTRY = {
    "spin_boson": spin_boson,
    "fmo7": fmo7,
    "cavity2level": lambda **kw: cavity(levels=2, **kw),
    "cavity3level": lambda **kw: cavity(levels=3, **kw),
    "singlet_fission": singlet_fission,
    "tully_sac": tully_sac,
    "tully_dac": tully_dac,
    "tully_ecr": tully_ecr,
    "asym_sac": asym_sac,
    "photodissociation_1": lambda **kw: photodissociation(1, **kw),
    "photodissociation_2": lambda **kw: photodissociation(2, **kw),
    "photodissociation_3": lambda **kw: photodissociation(3, **kw),
    "lvcm_pyrazine3": lvcm_pyrazine3,
    "lvcm_pyrazine24": lvcm_pyrazine24,
    "lvcm_crco5": lvcm_crco5,
}
SCATTERING_MODELS = ("tully_sac", "tully_dac", "tully_ecr", "asym_sac")


def build_model(spec):
    """Build a registered model from ``{"name": ..., **parameters}``."""
    spec = dict(spec)
    name = spec.pop("name", None)
    if name not in REGISTRY:
        raise ConfigError(f"unknown model {name!r}; known models: {', '.join(REGISTRY)}")
    if name in SCATTERING_MODELS:
        _require(spec, "p0")
    try:
        return REGISTRY[name](**spec)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for model {name!r}: {exc}") from None
