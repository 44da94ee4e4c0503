"""Initial conditions for trajectories and reproducible random streams."""
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_SALT = np.uint64(0xD1B54A32D192ED03)


def trajectory_rng(seed, index):
    """Generator for the initial conditions of one trajectory."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))


def _splitmix(z):
    z = z ^ (z >> np.uint64(30))
    z = z * _M1
    z = z ^ (z >> np.uint64(27))
    z = z * _M2
    return z ^ (z >> np.uint64(31))


def counter_uniform(seed, index, counter, stream=0):
    """Uniform numbers in [0, 1) keyed by (seed, trajectory, counter, stream).

    Stateless, so the draw a trajectory sees does not depend on how trajectories
    are batched or distributed over workers.
    """
    index = np.asarray(index, dtype=np.uint64)
    counter = np.asarray(counter, dtype=np.uint64)
    with np.errstate(over="ignore"):
        key = _splitmix(np.asarray(np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF) + _GOLDEN * np.uint64(stream + 1),
                                   dtype=np.uint64))
        z = _splitmix(key ^ (index * _SALT + _GOLDEN))
        z = _splitmix(z ^ (counter * _GOLDEN + _SALT))
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53


def default_gamma(F):
    return (np.sqrt(F + 1.0) - 1.0) / F


@dataclass(frozen=True)
class ElectronicInit:
    g: np.ndarray
    Gamma: np.ndarray
    representation: str
    jocc: int
    gamma: float
    g0: np.ndarray  # mapping variables in the occupation representation


@dataclass(frozen=True)
class NuclearInit:
    R: np.ndarray
    P: np.ndarray


def _check_representation(rep):
    if rep not in ("diabatic", "adiabatic"):
        raise ConfigError(f"unknown representation {rep!r}")


def sample_electronic_cps(F, gamma, jocc, representation, T0=None, rng=None, target=None):
    """Uniform sample of the constraint sphere with the commutator matrix set
    from the occupied state.

    ``representation`` is where the state ``jocc`` is occupied; ``target`` is
    where the variables will be propagated (defaults to the same).  Switching
    between the two needs the transformation matrix ``T0`` at the initial
    geometry.
    """
    if not gamma > -1.0 / F:
        raise ConfigError(f"gamma must exceed -1/F = {-1.0 / F:.6g}, got {gamma}")
    _check_representation(representation)
    target = representation if target is None else target
    _check_representation(target)
    rng = np.random.default_rng() if rng is None else rng
    z = rng.standard_normal(2 * F)
    radius = np.sqrt(2.0 * (1.0 + F * gamma))
    z *= radius / np.linalg.norm(z)
    g0 = z[:F] + 1j * z[F:]
    Gamma = np.diag(0.5 * np.abs(g0) ** 2).astype(complex)
    Gamma[jocc, jocc] -= 1.0
    g = g0
    if target != representation:
        if T0 is None:
            raise ConfigError("changing representation needs the initial transformation matrix")
        # adiabatic components are T^T times diabatic ones
        U = T0.T if target == "adiabatic" else T0
        g = U @ g0
        Gamma = U @ Gamma @ U.T
    return ElectronicInit(g, Gamma, target, int(jocc), float(gamma), g0)


def sample_nuclear(model, rng, init=None):
    spec = model.nuclear_init if init is None else init
    if spec is None:
        raise ConfigError(f"model {model.label} has no initial nuclear distribution")
    R = spec.mean_R + spec.sigma_R * rng.standard_normal(len(spec.mean_R))
    if spec.positive:
        # rejection is practically never triggered for the shipped widths
        for _ in range(1000):
            bad = R <= 0
            if not np.any(bad):
                break
            R[bad] = spec.mean_R[bad] + spec.sigma_R[bad] * rng.standard_normal(int(bad.sum()))
        else:
            raise ConfigError("could not draw a nuclear configuration inside the positive domain")
    P = spec.mean_P + spec.sigma_P * rng.standard_normal(len(spec.mean_P))
    return NuclearInit(R, P)


GDTWA_PHASES = np.array([0.25, 0.75, 1.25, 1.75]) * np.pi


def sample_gdtwa(F, jocc, rng):
    """Discrete kernel with random quarter phases coupling the occupied state."""
    if F < 2:
        raise ConfigError("discrete kernel sampling needs at least two states")
    theta = rng.choice(GDTWA_PHASES, size=F)
    K = np.zeros((F, F), dtype=complex)
    K[jocc, jocc] = 1.0
    others = np.arange(F) != jocc
    K[jocc, others] = np.exp(1j * theta[others]) / np.sqrt(2.0)
    K[others, jocc] = np.conj(K[jocc, others])
    return K


def sample_fssh_initial(F, jocc, representation, T0, rng):
    """Amplitudes (adiabatic basis) and the active state for surface hopping."""
    _check_representation(representation)
    phase = np.exp(2j * np.pi * rng.random())
    if representation == "adiabatic":
        c = np.zeros(F, dtype=complex)
        c[jocc] = phase
        return c, int(jocc)
    c = phase * np.asarray(T0, dtype=float)[jocc, :].astype(complex)
    prob = np.asarray(T0)[jocc, :] ** 2
    j = int(rng.choice(F, p=prob / prob.sum()))
    return c, j
