from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nafdyn.adiabatic import adiabatic_frame, diagonalize
from nafdyn.dynamics import (HALVING_LIMIT, advance_trajectory, draw_hops, electronic_step,
                             expm_hermitian, force_assembly, hop_probabilities, initialize,
                             kinetic_energy, make_method, rescale_along, rescale_to_energy,
                             select_force_state, total_energy, weight_matrix)
from nafdyn.errors import ConfigError
from nafdyn.models import (build_model, constant_model, harmonic_surfaces, linear_vibronic_model)


def _payload(g=None, Gamma=None, c=None, K=None):
    return SimpleNamespace(g=g, Gamma=Gamma, c=c, K=K)


def _random_hermitian(rng, F, batch=()):
    A = rng.standard_normal(batch + (F, F)) + 1j * rng.standard_normal(batch + (F, F))
    return 0.5 * (A + np.conj(np.swapaxes(A, -1, -2)))


# ---------------------------------------------------------------------------
# electronic propagation


def test_diagonal_propagator_only_advances_phases():
    E = np.array([-0.3, 0.1, 0.7])
    dt = 0.37
    g = np.array([1.4, 0.0, 0.0], dtype=complex)
    out = electronic_step(_payload(g=g), expm_hermitian(np.diag(E).astype(complex), dt))
    assert np.allclose(np.abs(out["g"]), np.abs(g), atol=1e-15)
    assert np.isclose(out["g"][0], 1.4 * np.exp(-1j * E[0] * dt), rtol=1e-15)


@pytest.mark.parametrize("t", [0.3, 1.0, 2.5, 7.0])
def test_rabi_oscillation(t):
    delta, r = 0.8, 1.3
    V = np.array([[0.0, delta], [delta, 0.0]], dtype=complex)
    g = np.array([r, 0.0], dtype=complex)
    n = 50
    for _ in range(n):
        g = electronic_step(_payload(g=g), expm_hermitian(V, t / n))["g"]
    assert np.isclose(abs(g[0]) ** 2, r**2 * np.cos(delta * t) ** 2, atol=1e-13)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), F=st.integers(2, 7), dt=st.floats(1e-3, 5.0))
def test_propagator_is_unitary(seed, F, dt):
    H = _random_hermitian(np.random.default_rng(seed), F, (4,))
    U = expm_hermitian(H, dt)
    I = U @ np.conj(np.swapaxes(U, -1, -2))
    assert np.max(np.abs(I - np.eye(F))) <= 1e-12
    w, Q = np.linalg.eigh(H)
    ref = (Q * np.exp(-1j * dt * w)[..., None, :]) @ np.conj(np.swapaxes(Q, -1, -2))
    assert np.max(np.abs(U - ref)) <= 1e-12


def test_non_hermitian_propagator_input_rejected():
    with pytest.raises(ValueError):
        expm_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex), 0.1)


def test_kernel_and_commutator_conjugated():
    rng = np.random.default_rng(1)
    U = expm_hermitian(_random_hermitian(rng, 3), 0.5)
    K = _random_hermitian(rng, 3)
    out = electronic_step(_payload(K=K, Gamma=K), U)
    assert np.allclose(out["K"], U @ K @ U.conj().T)
    assert np.isclose(np.trace(out["Gamma"]), np.trace(K))


# ---------------------------------------------------------------------------
# forces


def _brute_force(model, R, rho, mode, j=None, nonadiabatic=True):
    """-grad E_j (or population-weighted gradients) - sum_{k!=l} (E_k - E_l) d_lk rho_kl."""
    frame = adiabatic_frame(model.potential(R), model.gradient(R))
    G = model.gradient(R)
    F = model.F
    gradE = np.einsum("nk,jnm,mk->jk", frame.T, G, frame.T)
    if mode == "single":
        force = -gradE[:, j]
    else:
        force = -sum(gradE[:, k] * rho[k, k].real for k in range(F))
    if nonadiabatic:
        for k in range(F):
            for l in range(F):
                if k != l:
                    force = force - (frame.E[k] - frame.E[l]) * frame.d[:, l, k] * rho[k, l].real
    return force


def _three_state_model(rng, N=2):
    K = rng.standard_normal((N, 3, 3)) * 0.05
    K = K + np.swapaxes(K, -1, -2)
    return linear_vibronic_model("three_state", np.diag([0.0, 0.05, 0.12]), K, np.linspace(0.5, 1.0, N))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), mode=st.sampled_from(["single", "mean_field"]),
       nonadiabatic=st.booleans())
def test_force_matches_brute_force_sum(seed, mode, nonadiabatic):
    rng = np.random.default_rng(seed)
    model = _three_state_model(rng)
    R = rng.standard_normal(2) * 0.3
    rho = _random_hermitian(rng, 3)
    j = int(rng.integers(3))
    E, T = diagonalize(model.potential(R[None]))
    got = force_assembly(model, R[None], T, rho[None], mode, np.array([j]), nonadiabatic)[0]
    assert np.allclose(got, _brute_force(model, R, rho, mode, j, nonadiabatic), atol=1e-12)


def test_nonadiabatic_term_two_state_example():
    # E = (0, 0.02) and T = 1 at R = 0; dV_12/dR = d_12 (E_2 - E_1) gives d_12 = 1
    K = np.zeros((1, 2, 2))
    K[0, 0, 1] = K[0, 1, 0] = 0.02
    model = linear_vibronic_model("example", np.diag([0.0, 0.02]), K, np.array([0.0]))
    R = np.zeros((1, 1))
    frame = adiabatic_frame(model.potential(R[0]), model.gradient(R[0]))
    # fix the sign of the lower state so that d_12 = +1
    T = frame.T * np.sign(frame.d[0, 0, 1]) ** np.array([1, 0])
    assert np.isclose((T.T @ model.gradient(R[0])[0] @ T)[0, 1] / 0.02, 1.0)
    rho = np.array([[[0.0, 0.25], [0.25, 0.0]]])
    T = T[None]
    total = force_assembly(model, R, T, rho, "single", np.array([0]))
    bo = force_assembly(model, R, T, rho, "single", np.array([0]), nonadiabatic=False)
    assert np.isclose((total - bo)[0, 0], -0.01, rtol=1e-13)


def test_born_oppenheimer_force_and_one_hot_weights():
    model = harmonic_surfaces(0.3, [0.0, 0.5, 1.0])
    R = np.array([[0.7]])
    E, T = diagonalize(model.potential(R))
    rho = np.random.default_rng(0).standard_normal((1, 3, 3)) + 0j
    f = force_assembly(model, R, T, rho, "single", np.array([1]))
    assert np.allclose(f, -0.3 * 0.7, rtol=1e-14)
    one_hot = np.zeros((1, 3, 3), dtype=complex)
    one_hot[0, 2, 2] = 1.0
    rng = np.random.default_rng(2)
    model3 = _three_state_model(rng)
    R3 = np.array([[0.1, -0.2]])
    E3, T3 = diagonalize(model3.potential(R3))
    assert np.allclose(force_assembly(model3, R3, T3, one_hot, "mean_field"),
                       force_assembly(model3, R3, T3, one_hot, "single", np.array([2])), atol=1e-15)


# ---------------------------------------------------------------------------
# switching and rescaling


def test_force_state_selection():
    pops = np.array([[0.7, 0.3]])
    E = np.array([[0.1, 0.3]])
    j, acc, frus = select_force_state(pops, np.array([1]), np.array([0.5]), E, np.array([0.2]))
    assert j[0] == 0 and acc[0] and not frus[0]
    j, acc, frus = select_force_state(pops, np.array([1]), np.array([0.05]), E, np.array([0.0]) + 1e-3)
    assert j[0] == 1 and frus[0] and not acc[0]
    j, acc, frus = select_force_state(np.array([[0.5, 0.5]]), np.array([1]), np.array([0.5]), E,
                                      np.array([0.2]))
    assert j[0] == 1 and not acc[0] and not frus[0]


def test_rescale_along_momentum():
    P = np.array([[1.0]])
    M = np.array([1.0])
    out, frus = rescale_to_energy(P, M, np.array([0.7]))
    assert not frus[0] and np.isclose(out[0, 0], np.sqrt(1.4), rtol=1e-15)
    assert np.isclose(np.sqrt(1.4), 1.18322, atol=5e-6)
    same, _ = rescale_to_energy(P, M, np.array([0.5]))
    assert np.allclose(same, P, rtol=1e-15)
    _, frus = rescale_to_energy(P, M, np.array([-1e-3]), tol=1e-12)
    assert frus[0]
    clamp, frus = rescale_to_energy(P, M, np.array([-1e-13]), tol=1e-12)
    assert not frus[0] and clamp[0, 0] == 0.0
    _, frus = rescale_to_energy(np.zeros((1, 1)), M, np.array([0.2]))
    assert frus[0]


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), N=st.integers(1, 4))
def test_rescale_along_coupling_conserves_energy_with_smaller_root(seed, N):
    rng = np.random.default_rng(seed)
    P = rng.standard_normal((1, N))
    M = rng.uniform(0.5, 3.0, N)
    d = rng.standard_normal((1, N))
    dE = rng.uniform(-0.5, 0.5, 1) * kinetic_energy(P, M)
    out, frus = rescale_along(P, M, d, dE)
    a = 0.5 * np.sum(d * d / M)
    b = np.sum(d * P / M)
    roots = np.roots([a, b, dE[0]])
    if np.all(np.isreal(roots)):
        assert not frus[0]
        lam = roots.real[np.argmin(np.abs(roots.real))]
        assert np.allclose(out, P + lam * d, atol=1e-10)
        assert np.isclose(kinetic_energy(out, M)[0], kinetic_energy(P, M)[0] - dE[0], atol=1e-12)
    else:
        assert frus[0] and np.array_equal(out, P)


def test_rescale_along_without_real_root_is_frustrated():
    P = np.array([[0.1]])
    out, frus = rescale_along(P, np.array([1.0]), np.array([[1.0]]), np.array([1.0]))
    assert frus[0] and np.array_equal(out, P)


def test_hop_probability_vanishes_without_coupling():
    c = np.array([[0.8, 0.6j]])
    prob = hop_probabilities(c, np.array([0]), np.zeros((1, 2, 2)), 0.5)
    assert np.all(prob == 0)
    assert draw_hops(prob, np.array([0.0]))[0] == -1


def test_hop_probability_formula_and_cap():
    c = np.array([[0.8, 0.6]], dtype=complex)
    vd = np.array([[[0.0, 0.3], [-0.3, 0.0]]])
    prob = hop_probabilities(c, np.array([0]), vd, 0.1)
    assert np.isclose(prob[0, 1], 2 * 0.1 * 0.6 * 0.8 * 0.3 / 0.64)
    assert hop_probabilities(c, np.array([0]), 1e3 * vd, 0.1)[0, 1] == 1.0
    assert draw_hops(prob, np.array([prob[0, 1] * 0.5]))[0] == 1
    assert draw_hops(prob, np.array([prob[0, 1] * 1.5]))[0] == -1


# ---------------------------------------------------------------------------
# full steps


def _run(model, method, n, dt, steps, seed=1):
    state = initialize(model, method, np.arange(n), seed)
    history = [state]
    events = []
    for _ in range(steps):
        out = advance_trajectory(state, model, method, dt)
        state = out.state
        history.append(state)
        events.append(out.events)
    return history, events


def _sac(p0=20.0):
    return build_model({"name": "tully_sac", "p0": p0})


def test_cps_norm_trace_and_naf_energy_conserved():
    model = _sac()
    method = make_method("naf", F=2)
    history, events = _run(model, method, 64, model.defaults["dt"], 600)
    radius = 1.0 + 2 * method.gamma
    H0 = history[0].H0
    for s in history[1:]:
        assert np.max(np.abs(np.sum(np.abs(s.g) ** 2, axis=-1) / 2 - radius)) <= 1e-10
        assert np.max(np.abs(np.trace(s.Gamma, axis1=-2, axis2=-1) - 2 * method.gamma)) <= 1e-10
        KE = kinetic_energy(s.P, model.masses)
        assert np.max(np.abs(KE + s.E[np.arange(64), s.j] - H0)) <= 1e-9 * np.max(np.abs(H0))
    assert not np.any(history[-1].failed)
    assert sum(int(e.switched.sum()) for e in events) > 0


def test_accepted_switches_are_energy_feasible():
    model = _sac(20.0)
    method = make_method("naf", F=2)
    state = initialize(model, method, np.arange(128), 5)
    seen = 0
    for _ in range(800):
        out = advance_trajectory(state, model, method, model.defaults["dt"])
        sw = out.events.switched
        if np.any(sw):
            rows = np.flatnonzero(sw)
            assert np.all(state.H0[rows] - out.state.E[rows, out.state.j[rows]] >= -1e-12 * np.abs(state.H0[rows]))
            seen += len(rows)
        state = out.state
    assert seen > 0


def _ehrenfest_drift(model, method, dt, t_final, n=32):
    history, _ = _run(model, method, n, dt, int(round(t_final / dt)))
    E0 = total_energy(model, method, history[0])
    for s in history[1:]:
        assert np.max(np.abs(np.sum(np.abs(s.c) ** 2, axis=-1) - 1.0)) <= 1e-10
    return max(np.max(np.abs(total_energy(model, method, s) - E0)) for s in history[1:])


@pytest.mark.parametrize("electronic", ["diabatic_transform", "adiabatic_direct"])
def test_amplitude_norm_and_ehrenfest_energy(electronic):
    model = _sac()
    method = make_method("ehrenfest", electronic=electronic)
    dt = model.defaults["dt"]
    drift = _ehrenfest_drift(model, method, dt, 1500 * dt)
    assert drift <= 1e-6
    # second order: halving the step quarters the drift
    ratio = drift / _ehrenfest_drift(model, method, dt / 2, 1500 * dt)
    assert 3.0 < ratio < 5.0


def test_fssh_energy_between_and_at_hops():
    model = _sac(12.0)
    method = make_method("fssh")
    history, events = _run(model, method, 64, model.defaults["dt"], 1500, seed=3)
    H0 = history[0].H0

    def energy(s):
        return kinetic_energy(s.P, model.masses) + s.E[np.arange(64), s.j]

    # the hop rescale acts on the mid-step momentum, so only steps without a hop
    # are compared at full-step times
    drift = np.zeros(64)
    for prev, s, ev in zip(history, history[1:], events):
        still = ~ev.switched
        drift[still] += np.abs(energy(s) - energy(prev))[still]
    assert np.max(drift) <= 1e-5 * np.max(np.abs(H0))
    assert sum(int(e.switched.sum()) for e in events) > 0


@pytest.mark.parametrize("name", ["naf", "naf_s", "naf_ehrenfest", "naf_gdtwa", "gdtwa",
                                  "mean_field_cps", "ehrenfest", "fssh", "fs_naf"])
def test_every_method_runs_and_is_batch_independent(name):
    model = build_model({"name": "photodissociation_1"})
    method = make_method(name, F=3)
    dt = model.defaults["dt"] * 4
    idx = np.arange(12)
    full = initialize(model, method, idx, 9)
    part = initialize(model, method, idx[5:9], 9)
    for _ in range(40):
        full = advance_trajectory(full, model, method, dt).state
        part = advance_trajectory(part, model, method, dt).state
    assert not np.any(full.failed)
    assert np.allclose(full.R[5:9], part.R, rtol=1e-12, atol=1e-14)
    assert np.array_equal(full.j[5:9], part.j)


def test_unrecoverable_final_rescale_fails_after_halving_limit():
    model = harmonic_surfaces(1.0, [0.0])
    method = make_method("naf_ehrenfest")
    state = initialize(model, method, [0], 0, R=np.array([[0.5]]), P=np.array([[0.1]]))
    state.H0 = state.H0 - 1.0  # below the potential: the final rescale can never succeed
    out = advance_trajectory(state, model, method, 0.1)
    assert out.state.failed[0] and out.events.halved[0]
    frozen = advance_trajectory(out.state, model, method, 0.1)
    assert np.array_equal(frozen.state.R, out.state.R)
    assert HALVING_LIMIT == 25


def test_turning_point_overshoot_recovers_by_halving():
    model = harmonic_surfaces(1.0, [0.0])
    method = make_method("naf_ehrenfest")
    # from the bottom with unit energy, one full step lands at R = 1.9, past the turning point at 1
    state = initialize(model, method, [0], 0, R=np.array([[0.0]]), P=np.array([[1.0]]))
    out = advance_trajectory(state, model, method, 1.9)
    assert out.events.halved[0] and not out.state.failed[0]
    KE = kinetic_energy(out.state.P, model.masses)
    assert np.isclose(KE[0] + 0.5 * out.state.R[0, 0] ** 2, state.H0[0], rtol=1e-12)


def test_hard_wall_reflection_event():
    model = build_model({"name": "photodissociation_1"})
    method = make_method("ehrenfest", hard_wall=True)
    state = initialize(model, method, [0], 0, R=np.array([[0.01]]), P=np.array([[-400.0]]))
    out = advance_trajectory(state, model, method, 1.0)
    assert out.events.reflected[0]
    assert out.state.P[0, 0] > 0
    assert out.events.names(0) == ["hard-wall reflection"]


def test_method_validation():
    with pytest.raises(ConfigError):
        make_method("naf", F=2, hard_wall=True)
    with pytest.raises(ConfigError):
        make_method("ehrenfest", gamma=0.3)
    with pytest.raises(ConfigError):
        make_method("naf", F=2, gamma=-0.6)
    with pytest.raises(ConfigError):
        make_method("bogus")
    assert np.isclose(make_method("naf", F=2).gamma, (np.sqrt(3) - 1) / 2)


def test_stochastic_selection_is_reproducible():
    model = _sac()
    method = make_method("naf_s", F=2)
    a, _ = _run(model, method, 16, model.defaults["dt"], 300, seed=4)
    b, _ = _run(model, method, 16, model.defaults["dt"], 300, seed=4)
    assert np.array_equal(a[-1].P, b[-1].P) and np.array_equal(a[-1].j, b[-1].j)


def test_fs_naf_differs_from_fssh_through_the_nonadiabatic_force():
    model = _sac(12.0)
    a, _ = _run(model, make_method("fssh"), 16, model.defaults["dt"], 800, seed=2)
    b, _ = _run(model, make_method("fs_naf"), 16, model.defaults["dt"], 800, seed=2)
    # the coherence-weighted force is small early on but must leave a trace
    assert np.max(np.abs(a[-1].P - b[-1].P)) > 1e-6
    assert np.array_equal(a[0].P, b[0].P)


def test_frozen_nuclei_populations_follow_exact_propagation():
    V = np.array([[0.0, 0.05, 0.01], [0.05, 0.03, 0.02], [0.01, 0.02, 0.08]])
    model = constant_model(V)
    method = make_method("naf", F=3)
    state = initialize(model, method, np.arange(8), 0, R=np.zeros((8, 1)), P=np.zeros((8, 1)))
    g0, T = state.g.copy(), state.T[0]
    dt, steps = 0.5, 400
    for _ in range(steps):
        state = advance_trajectory(state, model, method, dt).state
    U = expm_hermitian(T.T @ V @ T + 0j, dt * steps)
    assert np.allclose(state.g, g0 @ U.T, atol=1e-10)
