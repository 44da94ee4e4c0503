import numpy as np
import pytest

from nafdyn.errors import ConfigError, ExtentError
from nafdyn.models import build_model, constant_model, harmonic_surfaces, linear_crossing
from nafdyn.reference import (GridWavefunction, converged_reference, frozen_nuclei_tdse,
                              grid_energy, grid_propagate, initial_wavefunction, landau_zener_probability,
                              make_grid, momentum_density, reference_observables)


def _packet(grid, R0, P0, alpha, F=1, state=0, mass=1.0):
    psi = np.zeros((F, len(grid)), dtype=complex)
    psi[state] = np.exp(-0.5 * alpha * (grid - R0) ** 2 + 1j * P0 * (grid - R0))
    wf = GridWavefunction(grid, psi, mass)
    wf.psi /= np.sqrt(wf.norm())
    return wf


def _moments(wf):
    dens = np.sum(np.abs(wf.psi) ** 2, axis=0) * wf.dx
    mean = np.sum(wf.grid * dens)
    return mean, np.sum((wf.grid - mean) ** 2 * dens)


def test_free_particle_dispersion():
    model = constant_model(np.zeros((1, 1)))
    mass, alpha, P0 = 3.0, 0.5, 2.0
    wf0 = _packet(make_grid(-60.0, 60.0, 2048), -10.0, P0, alpha, mass=mass)
    sigma2 = 0.5 / alpha
    snaps = grid_propagate(model, wf0, 0.05, 12.0, record_every=40)
    for wf in snaps:
        mean, var = _moments(wf)
        assert np.isclose(mean, -10.0 + P0 / mass * wf.t, atol=1e-9)
        assert np.isclose(var, sigma2 + wf.t**2 / (4 * mass**2 * sigma2), rtol=1e-9)
        assert abs(wf.norm() - 1.0) <= 1e-10


def test_harmonic_energy_and_norm_conservation():
    model = harmonic_surfaces(1.0, [0.0], mass=1.0)
    wf0 = _packet(make_grid(-15.0, 15.0, 256), 2.0, 0.5, 1.0)
    e0 = grid_energy(model, wf0)
    # the split-operator energy error is a bounded O(dt^2) oscillation
    snaps = grid_propagate(model, wf0, 1e-4, 10.0, record_every=10000)
    assert len(snaps) == 11
    for wf in snaps:
        assert abs(wf.norm() - 1.0) <= 1e-10
        assert abs(grid_energy(model, wf) - e0) <= 1e-8 * abs(e0)


def _final_state(model, wf0, dt, t_final):
    return grid_propagate(model, wf0, dt, t_final)[-1].psi


def test_split_operator_is_second_order():
    model = build_model({"name": "tully_sac", "p0": 15.0})
    wf0 = initial_wavefunction(model, make_grid(-30.0, 30.0, 1024))
    wf0.psi = wf0.psi.copy()
    t = 600.0
    exact = _final_state(model, wf0, 0.5, t)
    errs = []
    steps = (8.0, 4.0, 2.0)
    for dt in steps:
        errs.append(np.sqrt(np.sum(np.abs(_final_state(model, wf0, dt, t) - exact) ** 2) * wf0.dx))
    slope = np.polyfit(np.log(steps), np.log(errs), 1)[0]
    assert abs(slope - 2.0) < 0.2


def test_initial_populations_and_unitarity():
    model = build_model({"name": "tully_sac", "p0": 20.0})
    wf0 = initial_wavefunction(model, make_grid(-40.0, 40.0, 2048), (0, "diabatic"))
    obs = reference_observables(model, grid_propagate(model, wf0, 1.0, 1500.0, record_every=100))
    assert np.allclose(obs["populations_diabatic"][0], [1.0, 0.0], atol=1e-12)
    assert np.allclose(obs["populations_diabatic"].sum(axis=1), 1.0, atol=1e-10)
    assert np.allclose(obs["populations_adiabatic"].sum(axis=1), 1.0, atol=1e-10)
    adiabatic = initial_wavefunction(model, make_grid(-40.0, 40.0, 2048), (1, "adiabatic"))
    obs = reference_observables(model, [adiabatic])
    assert np.allclose(obs["populations_adiabatic"][0], [0.0, 1.0], atol=1e-12)


def test_extent_error_when_packet_reaches_edge():
    model = constant_model(np.zeros((1, 1)))
    wf0 = _packet(make_grid(-20.0, 20.0, 512), 0.0, 5.0, 1.0)
    with pytest.raises(ExtentError):
        grid_propagate(model, wf0, 0.05, 10.0, record_every=10)


def test_initial_wavefunction_needs_one_dof():
    with pytest.raises(ConfigError):
        initial_wavefunction(build_model({"name": "spin_boson", "n_modes": 2}), make_grid(-1, 1, 8))


def test_momentum_density_of_gaussian():
    alpha, P0 = 0.8, 3.0
    wf = _packet(make_grid(-40.0, 40.0, 4096), 0.0, P0, alpha)
    p = np.linspace(0.0, 6.0, 61)
    expected = np.exp(-(p - P0) ** 2 / alpha) / np.sqrt(np.pi * alpha)
    assert np.allclose(momentum_density(wf, p), expected, atol=1e-4)
    a = 0.05
    smooth = np.exp(-(p - P0) ** 2 / (alpha + 4 * a)) / np.sqrt(np.pi * (alpha + 4 * a))
    assert np.allclose(momentum_density(wf, p, a), smooth, atol=1e-8)


def test_ecr_momentum_lobes():
    model = build_model({"name": "tully_ecr", "p0": 20.0})
    p_grid = np.linspace(-40.0, 40.0, 801)
    obs, _ = converged_reference(model, model.defaults["t_final"], p_grid=p_grid, a=0.05)
    dens = obs["momentum"][1]
    assert np.isclose(np.trapezoid(dens, p_grid), 1.0, atol=1e-3)
    reflected = np.trapezoid(np.where(p_grid < 0, dens, 0), p_grid)
    transmitted = np.trapezoid(np.where(p_grid > 0, dens, 0), p_grid)
    assert reflected > 0.2 and transmitted > 0.2
    # two separated lobes with a depleted region between them
    peak_neg, peak_pos = dens[p_grid < 0].max(), dens[p_grid > 0].max()
    assert dens[np.abs(p_grid) < 3].max() < 0.1 * min(peak_neg, peak_pos)
    total = sum(obs["channels"].values())
    assert np.isclose(total, 1.0, atol=1e-8)
    assert np.isclose(reflected, obs["channels"]["reflection_1"] + obs["channels"]["reflection_2"],
                      atol=0.02)


def test_sac_reference_channels():
    model = build_model({"name": "tully_sac", "p0": 20.0})
    obs, dev = converged_reference(model, model.defaults["t_final"])
    assert dev <= 1e-3
    ch = obs["channels"]
    # values from an independent converged grid propagation
    assert np.isclose(ch["transmission_1"], 0.50705, atol=1e-3)
    assert np.isclose(ch["transmission_2"], 0.49295, atol=1e-3)
    assert ch["reflection_1"] < 1e-4 and ch["reflection_2"] < 1e-4


def test_tdse_constant_coupling_rabi():
    delta = 0.1
    H = np.array([[0.0, delta], [delta, 0.0]])
    times, c = frozen_nuclei_tdse(lambda t: H, [1.0, 0.0], 0.1, 50.0)
    assert np.allclose(np.abs(c[:, 0]) ** 2, np.cos(delta * times) ** 2, atol=1e-12)


def test_tdse_diagonal_keeps_populations():
    H = lambda t: np.diag([np.sin(t), 0.3 * t, -1.0])
    c0 = np.array([0.6, 0.0, 0.8j])
    _, c = frozen_nuclei_tdse(H, c0, 0.05, 20.0)
    assert np.allclose(np.abs(c) ** 2, np.abs(c0) ** 2, atol=1e-13)


def test_tdse_is_fourth_order():
    H = lambda t: np.array([[np.cos(t), 0.4 + 0.2 * t], [0.4 + 0.2 * t, -np.cos(t)]])
    ref = frozen_nuclei_tdse(H, [1.0, 0.0], 0.0025, 4.0)[1][-1]
    steps = (0.2, 0.1, 0.05)
    errs = [np.linalg.norm(frozen_nuclei_tdse(H, [1.0, 0.0], h, 4.0)[1][-1] - ref) for h in steps]
    slope = np.polyfit(np.log(steps), np.log(errs), 1)[0]
    assert abs(slope - 4.0) < 0.3


def test_landau_zener_formula():
    assert np.isclose(landau_zener_probability(np.sqrt(np.log(2) / (2 * np.pi)), 1.0, 1.0), 0.5,
                      rtol=1e-15)
    assert landau_zener_probability(0.0, 0.02, 1.0) == 1.0
    assert landau_zener_probability(1e-9, 0.02, 1.0) > 1 - 1e-12
    assert np.isclose(landau_zener_probability(0.005, 0.02, 1.0), np.exp(-7.853981634e-3), rtol=1e-9)
    assert round(landau_zener_probability(0.005, 0.02, 1.0), 5) == 0.99218
    with pytest.raises(ConfigError):
        landau_zener_probability(0.1, 0.0, 1.0)


def _sweep_probability(coupling, slope, velocity, half_width, dt):
    """Start on the lower adiabat and measure the upper one, which converges
    quadratically in coupling / end gap instead of linearly."""
    model = linear_crossing(slope, coupling)

    def H(t):
        return model.potential(np.array([velocity * t]))

    start = np.linalg.eigh(H(-half_width))[1][:, 0]
    _, c = frozen_nuclei_tdse(H, start, dt, 2 * half_width, t0=-half_width, record_every=10**9)
    end = np.linalg.eigh(H(half_width))[1][:, 1]
    return abs(end @ c[-1]) ** 2


@pytest.mark.parametrize("exponent", [7.853981634e-3, 0.1, 1.0, 3.0])
def test_landau_zener_matches_tdse_sweep(exponent):
    slope, velocity = 0.02, 1.0
    coupling = np.sqrt(exponent * velocity * slope / (2 * np.pi))
    P = _sweep_probability(coupling, slope, velocity, 400.0, 0.05)
    assert abs(P - landau_zener_probability(coupling, slope, velocity)) <= 0.01 * P
