"""Ensemble estimators: weights, reduced densities, nuclear observables,
momentum distributions and scattering channel tables."""
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

KINDS = ("population", "coherence", "population_difference", "mean_R", "mean_P",
         "momentum_distribution", "scattering")


def electronic_weight0(g0, jocc, gamma, F):
    """Time-zero weight of a constraint-sphere trajectory."""
    g0 = np.asarray(g0)
    return F * (0.5 * np.abs(g0[..., jocc]) ** 2 - gamma)


def cps_coefficients(F, gamma):
    s = 1.0 + F * gamma
    return (1.0 + F) / (2.0 * s * s), (1.0 - gamma) / s


def cps_density(g, gamma):
    """Per-trajectory density estimate from mapping variables g (..., F)."""
    F = g.shape[-1]
    a, b = cps_coefficients(F, gamma)
    return a * g[..., :, None] * np.conj(g)[..., None, :] - b * np.eye(F)


def surface_hopping_density(c, active):
    """Active state on the diagonal, amplitude coherences off the diagonal."""
    F = c.shape[-1]
    rho = c[..., :, None] * np.conj(c)[..., None, :]
    idx = np.arange(F)
    rho[..., idx, idx] = (np.asarray(active)[..., None] == idx).astype(float)
    return rho


def to_diabatic(rho, T):
    return T @ rho @ np.swapaxes(T, -1, -2)


def to_adiabatic(rho, T):
    return np.swapaxes(T, -1, -2) @ rho @ T


def estimate_density(state, method, representation="adiabatic"):
    """Per-trajectory density matrices (without the time-zero weight)."""
    kind = method.estimator
    if kind == "cps":
        rho = cps_density(state.g, method.gamma)
    elif kind == "amplitudes":
        rho = state.c[..., :, None] * np.conj(state.c)[..., None, :]
    elif kind == "fssh":
        rho = surface_hopping_density(state.c, state.j)
    elif kind == "kernel":
        rho = state.K.copy()
    else:
        raise ConfigError(f"unknown estimator {kind!r}")
    if representation == "diabatic":
        rho = to_diabatic(rho, state.T)
    return rho


# ---------------------------------------------------------------------------
# reduction


class Accumulator:
    """Running weighted means and squared deviations (Chan et al. merging).

    Merging in a fixed order gives bit-identical results however the samples
    were split.
    """

    def __init__(self, shape):
        self.n = 0
        self.mean = np.zeros(shape)
        self.m2 = np.zeros(shape)

    def add(self, values):
        values = np.asarray(values, dtype=float)
        if len(values) == 0:
            return self
        part = Accumulator(values.shape[1:])
        part.n = len(values)
        # constant columns keep their exact value so their spread is exactly zero
        same = np.all(values == values[0], axis=0)
        part.mean = np.where(same, values[0], values.mean(axis=0))
        part.m2 = np.where(same, 0.0, ((values - part.mean) ** 2).sum(axis=0))
        return self.merge(part)

    def merge(self, other):
        if other.n == 0:
            return self
        if self.n == 0:
            self.n, self.mean, self.m2 = other.n, other.mean.copy(), other.m2.copy()
            return self
        n = self.n + other.n
        delta = other.mean - self.mean
        self.mean = self.mean + delta * (other.n / n)
        self.m2 = self.m2 + other.m2 + delta**2 * (self.n * other.n / n)
        self.n = n
        return self

    def stderr(self):
        if self.n < 2:
            return np.zeros_like(self.mean)
        return np.sqrt(self.m2 / (self.n - 1) / self.n)


@dataclass(frozen=True)
class ObservableRequest:
    kind: str
    representation: str = "diabatic"
    indices: tuple = ()
    damping: float = None
    grid: tuple = None  # (p_min, p_max, n_points)


@dataclass
class TimeSeries:
    times: np.ndarray
    columns: dict  # name -> (estimate, stderr)
    n_traj: int
    n_failed: int = 0
    flags: list = field(default_factory=list)


def channel_names(request, model):
    kind, rep = request.kind, request.representation
    if kind == "population":
        states = request.indices or tuple(range(model.F))
        return [f"population_{rep}_{n + 1}" for n in states]
    if kind == "coherence":
        out = []
        for n, m in request.indices:
            base = f"coherence_{rep}_{n + 1}_{m + 1}"
            out += [base + "_re", base + "_im"]
        return out
    if kind == "population_difference":
        n, m = request.indices or (0, 1)
        return [f"population_difference_{rep}_{n + 1}_{m + 1}"]
    if kind in ("mean_R", "mean_P"):
        dofs = request.indices or tuple(range(model.N))
        return [f"{kind}_{k + 1}" for k in dofs]
    return []


def channel_values(request, model, method, state, weight):
    """Weighted per-trajectory values for the time-series channels of a request."""
    kind = request.kind
    if kind in ("population", "coherence", "population_difference"):
        rho = estimate_density(state, method, request.representation) * weight[:, None, None]
        if kind == "population":
            states = list(request.indices or range(model.F))
            return rho[:, states, states].real
        if kind == "coherence":
            cols = []
            for n, m in request.indices:
                cols += [rho[:, n, m].real, rho[:, n, m].imag]
            return np.stack(cols, axis=1)
        n, m = request.indices or (0, 1)
        return (rho[:, n, n] - rho[:, m, m]).real[:, None]
    if kind in ("mean_R", "mean_P"):
        dofs = list(request.indices or range(model.N))
        x = state.R if kind == "mean_R" else state.P
        x = x[:, dofs]
        if model.dimensionless_scale is not None:
            s = model.dimensionless_scale[dofs]
            x = x * s if kind == "mean_R" else x / s
        return x * weight[:, None]
    return np.zeros((len(weight), 0))


def finalize_columns(names, acc):
    """Turn accumulated channels into output columns (coherences as moduli)."""
    mean, err = acc.mean, acc.stderr()
    out = {}
    i = 0
    while i < len(names):
        name = names[i]
        if name.endswith("_re") and i + 1 < len(names) and names[i + 1] == name[:-3] + "_im":
            re, im = mean[..., i], mean[..., i + 1]
            mod = np.hypot(re, im)
            with np.errstate(invalid="ignore", divide="ignore"):
                # first-order propagation of the real and imaginary errors
                se = np.where(mod > 0, np.hypot(re * err[..., i], im * err[..., i + 1]) / mod,
                              np.hypot(err[..., i], err[..., i + 1]))
            out[name[:-3]] = (mod, se)
            i += 2
        else:
            out[name] = (mean[..., i], err[..., i])
            i += 1
    return out


# ---------------------------------------------------------------------------
# momentum distribution


def momentum_distribution(P, weights, a, grid, return_stderr=False):
    """Damped-Fourier momentum density, evaluated in closed form as a Gaussian
    kernel density estimate of variance 2a."""
    if not a > 0:
        raise ConfigError("momentum damping must be positive")
    P = np.asarray(P, dtype=float).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    grid = np.asarray(grid, dtype=float)
    n = len(P)
    norm = 1.0 / (2.0 * np.sqrt(np.pi * a))
    acc = Accumulator(grid.shape)
    for start in range(0, n, 2048):
        k = np.exp(-((grid[None, :] - P[start:start + 2048, None]) ** 2) / (4.0 * a))
        acc.add(w[start:start + 2048, None] * k * norm)
    if return_stderr:
        return acc.mean, acc.stderr()
    return acc.mean


def momentum_distribution_quadrature(P, weights, a, grid, n_s=None):
    """Direct trapezoid evaluation of (1/pi) Re int_0^inf ds e^{-iPs} C(s) e^{-a s^2}."""
    P = np.asarray(P, dtype=float).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    grid = np.asarray(grid, dtype=float)
    s_max = np.sqrt(40.0 / a)
    spread = np.max(np.abs(grid[:, None] - P[None, :])) + 1.0
    if n_s is None:
        n_s = int(np.ceil(s_max * spread / 0.5)) + 1
    s = np.linspace(0.0, s_max, n_s)
    ds = s[1] - s[0]
    C = (w[None, :] * np.exp(1j * s[:, None] * P[None, :])).sum(axis=1) / len(P)
    f = np.exp(-1j * grid[:, None] * s[None, :]) * (C * np.exp(-a * s * s))[None, :]
    integral = ds * (f.sum(axis=1) - 0.5 * f[:, 0] - 0.5 * f[:, -1])
    return integral.real / np.pi


# ---------------------------------------------------------------------------
# scattering


def scattering_channel_names(F):
    names = []
    for k in range(F):
        names += [f"reflection_{k + 1}", f"transmission_{k + 1}"]
    return names


def scattering_values(R, adiabatic_populations, weight):
    """Per-trajectory weighted channel values, ordered as scattering_channel_names."""
    x = np.asarray(R)[:, 0]
    side = np.stack([x < 0, x > 0], axis=1).astype(float)  # reflection, transmission
    vals = (weight[:, None, None] * adiabatic_populations[:, :, None] * side[:, None, :])
    return vals.reshape(len(x), -1)


def scattering_channels(R, adiabatic_populations, weights, region=None):
    """Channel probability table {name: (estimate, stderr)}."""
    R = np.asarray(R, dtype=float)
    if region is not None:
        inside = int(np.sum(np.abs(R[:, 0]) < region))
        if inside:
            warnings.warn(f"{inside} trajectories are still inside the coupling region", RuntimeWarning)
    vals = scattering_values(R, np.asarray(adiabatic_populations), np.asarray(weights, dtype=float))
    acc = Accumulator(vals.shape[1:]).add(vals)
    names = scattering_channel_names(adiabatic_populations.shape[1])
    err = acc.stderr()
    return {name: (acc.mean[i], err[i]) for i, name in enumerate(names)}
