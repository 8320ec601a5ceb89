import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from rydberg_arp.dynamics import (
    DecayChannel,
    ParametricHamiltonian,
    QuantumState,
    Trajectory,
    decay_rates,
    observables,
    propagate_master,
    propagate_schrodinger,
    propagator,
)
from rydberg_arp.forster import PairHamiltonian, coupling
from rydberg_arp.gates import DEFAULT_T2_CORRECTION, default_profile
from rydberg_arp.stark import field_from_profile, resonance_field


@pytest.fixture(scope="module")
def fig4_hamiltonian(catalog):
    prof = default_profile().shifted(1, DEFAULT_T2_CORRECTION)
    wf = field_from_profile(prof, catalog[0])
    h0, h2 = PairHamiltonian(catalog, 25.0).split()
    return ParametricHamiltonian(h0, h2, wf.envelope, tuple(wf.breakpoints())), wf.t_span


def _ket(n, k):
    v = np.zeros(n, dtype=complex)
    v[k] = 1
    return v


# -- Schrödinger ---------------------------------------------------------------

def test_zero_hamiltonian_is_identity():
    psi0 = np.array([0.6, 0.8j])
    traj = propagate_schrodinger(lambda t: np.zeros((2, 2)), psi0, (0.0, 3.0), t_eval=np.linspace(0, 3, 7))
    assert np.allclose(traj.states, psi0, atol=1e-14)


def test_two_level_limit_rabi(catalog):
    ch1 = catalog[0]
    h = PairHamiltonian([ch1], 25.0)
    H = h(resonance_field(ch1))
    V = coupling(ch1, 25.0)
    t = np.linspace(0, 2.0, 201)
    traj = propagate_schrodinger(lambda _: H, _ket(2, 0), (0.0, 2.0), t_eval=t)
    # residual detuning from the root finder is below 1e-9 rad/μs
    assert np.max(np.abs(np.abs(traj.states[:, 0]) ** 2 - np.cos(V * t) ** 2)) < 1e-6


def test_complex_hamiltonian_path():
    H = np.array([[1.0, 0.5 - 0.3j], [0.5 + 0.3j, -0.4]])
    psi0 = np.array([1.0, 0.0], dtype=complex)
    traj = propagate_schrodinger(lambda t: H, psi0, (0.0, 2.0))
    assert traj.final == pytest.approx(expm(-2j * H) @ psi0, abs=1e-10)


def test_parametric_matches_generic(fig4_hamiltonian):
    H, span = fig4_hamiltonian
    psi0 = _ket(H.dim, 0)
    fast = propagate_schrodinger(H, psi0, span)
    generic = propagate_schrodinger(lambda t: H(t), psi0, span, breakpoints=H.breakpoints)
    assert np.linalg.norm(fast.final - generic.final) < 1e-9


def test_norm_conservation_fig4(fig4_hamiltonian):
    H, span = fig4_hamiltonian
    t = np.linspace(*span, 1801)
    traj = propagate_schrodinger(H, _ket(H.dim, 0), span, t_eval=t)
    norms = np.linalg.norm(traj.states, axis=1)
    assert np.max(np.abs(norms - 1)) < 1e-10


@pytest.mark.slow
def test_step_halving_convergence(fig4_hamiltonian):
    H, span = fig4_hamiltonian
    a = propagate_schrodinger(H, _ket(H.dim, 0), span).final
    b = propagate_schrodinger(H, _ket(H.dim, 0), span, rtol=1e-12, atol=1e-14).final
    assert abs(abs(a[0]) ** 2 - abs(b[0]) ** 2) < 1e-7
    assert abs(np.angle(a[0] / b[0])) < 1e-6


def test_unnormalised_initial_state_rejected():
    with pytest.raises(ValueError):
        propagate_schrodinger(lambda t: np.eye(2), np.array([1.0, 1.0]), (0, 1))
    with pytest.raises(ValueError):
        propagate_schrodinger(lambda t: np.eye(3), np.array([1.0, 0.0]), (0, 1))


# -- master equation -----------------------------------------------------------

def test_single_level_decay():
    gamma = 1 / 270.0
    rho0 = np.diag([0.0, 1.0]).astype(complex)
    t = np.linspace(0, 50.0, 51)
    traj = propagate_master(lambda _: np.zeros((2, 2)), rho0, [DecayChannel(1, gamma)], (0.0, 50.0), t_eval=t)
    assert np.max(np.abs(traj.states[:, 1, 1].real - np.exp(-gamma * t))) < 1e-8
    obs = observables(traj)
    assert obs.trace == pytest.approx(np.exp(-gamma * t), abs=1e-8)


def test_coherence_decays_at_mean_rate():
    ga, gb = 1 / 270.0 + 1 / 314.0, 0.0
    psi = np.array([1, 1]) / math.sqrt(2)
    rho0 = np.outer(psi, psi).astype(complex)
    t = np.linspace(0, 40.0, 41)
    traj = propagate_master(lambda _: np.zeros((2, 2)), rho0, [DecayChannel(1, ga)], (0.0, 40.0), t_eval=t)
    assert np.abs(traj.states[:, 0, 1]) == pytest.approx(0.5 * np.exp(-(ga + gb) / 2 * t), abs=1e-9)


@pytest.mark.slow
def test_zero_decay_master_equals_schrodinger(fig4_hamiltonian):
    H, span = fig4_hamiltonian
    psi0 = _ket(H.dim, 0)
    t = np.linspace(*span, 91)
    pure = propagate_schrodinger(H, psi0, span, t_eval=t)
    mixed = propagate_master(H, np.outer(psi0, psi0), [], span, t_eval=t)
    dist = [np.linalg.norm(np.outer(p, p.conj()) - r) for p, r in zip(pure.states, mixed.states)]
    assert max(dist) < 1e-8
    assert np.max(np.abs(observables(mixed).trace - 1)) < 1e-10


def test_trace_monotone_and_hermitian(catalog):
    ch1 = catalog[0]
    H = PairHamiltonian([ch1], 25.0)(resonance_field(ch1))
    decays = [DecayChannel(0, 1 / 270 + 1 / 314), DecayChannel(1, 1 / 361 + 1 / 406)]
    t = np.linspace(0, 5.0, 501)
    traj = propagate_master(lambda _: H, np.diag([1.0, 0.0]).astype(complex), decays, (0.0, 5.0), t_eval=t)
    tr = observables(traj).trace
    assert np.all(np.diff(tr) <= 1e-13)
    herm = [np.linalg.norm(r - r.conj().T) for r in traj.states]
    assert max(herm) < 1e-10
    # an independent route: ρ = U ρ0 U† with the non-Hermitian propagator
    U = propagator(lambda _: H, 2, (0.0, 5.0), decays=decays)
    rho_u = U @ np.diag([1.0, 0.0]) @ U.conj().T
    assert np.linalg.norm(rho_u - traj.final) < 1e-9


def test_propagator_unitary_without_decay(fig4_hamiltonian):
    H, span = fig4_hamiltonian
    U = propagator(H, H.dim, span)
    # far-detuned columns wind through ~1e4 rad, so allow a few 1e-9 per column
    assert np.linalg.norm(U.conj().T @ U - np.eye(H.dim)) < 3e-8
    assert abs(np.linalg.norm(U[:, 0]) - 1) < 1e-10
    psi = propagate_schrodinger(H, _ket(H.dim, 0), span).final
    assert np.linalg.norm(U[:, 0] - psi) < 1e-9


def test_master_rejects_bad_density():
    with pytest.raises(ValueError):
        propagate_master(lambda _: np.zeros((2, 2)), np.diag([1.2, 0.0]), [], (0, 1))
    with pytest.raises(ValueError):
        propagate_master(lambda _: np.zeros((2, 2)), np.array([[0.5, 0.5], [0.0, 0.5]]), [], (0, 1))


# -- types ---------------------------------------------------------------------

def test_decay_channel_validation():
    with pytest.raises(ValueError):
        DecayChannel(0, -1.0)
    with pytest.raises(ValueError):
        DecayChannel(-1, 1.0)
    assert DecayChannel.from_lifetime(2, 361.0).rate == pytest.approx(1 / 361)
    g = decay_rates([DecayChannel(1, 0.1), DecayChannel(1, 0.2)], 3)
    assert g == pytest.approx([0.0, 0.3, 0.0])
    with pytest.raises(ValueError):
        decay_rates([DecayChannel(5, 0.1)], 3)


def test_parametric_hamiltonian_validation():
    with pytest.raises(ValueError):
        ParametricHamiltonian(np.array([[0.0, 1.0], [0.0, 0.0]]), np.zeros((2, 2)), lambda t: 1.0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4))
def test_quantum_state_validation(xs):
    v = np.array(xs[:2]) + 1j * np.array(xs[2:])
    norm = np.linalg.norm(v)
    state = QuantumState(v)
    if norm > 1 + 1e-10:
        with pytest.raises(ValueError):
            state.validate()
    else:
        state.validate()
        QuantumState(state.density()).validate()
    assert state.trace() == pytest.approx(norm**2)


def test_quantum_state_basis_and_labels():
    s = QuantumState.basis(3, 1, labels=("a", "b", "c"))
    assert s.density()[1, 1] == 1
    with pytest.raises(ValueError):
        QuantumState(np.zeros(3), labels=("a",))
    with pytest.raises(ValueError):
        QuantumState(np.zeros((2, 3)))


def test_observables_pure_state():
    states = np.array([[1, 0], [math.sqrt(0.5), 1j * math.sqrt(0.5)]], dtype=complex)
    obs = observables(Trajectory(np.array([0.0, 1.0]), states), phase_index=1, reference_index=0)
    assert obs.purity == pytest.approx([1.0, 1.0])
    assert obs.phase[1] == pytest.approx(math.pi / 2)
    with pytest.raises(ValueError):
        observables(Trajectory(np.array([]), np.zeros((0, 2))))


def test_trajectory_dumps(tmp_path):
    traj = propagate_schrodinger(lambda t: np.array([[0, 1.0], [1.0, 0]]), np.array([1.0, 0.0]), (0, 1),
                                 t_eval=np.linspace(0, 1, 5), labels=("g", "e"))
    traj.to_csv(tmp_path / "t.csv")
    rows = list(csv.reader((tmp_path / "t.csv").open()))
    assert rows[0] == ["t_us", "pop[g]", "pop[e]", "phase[g]_rad", "trace", "purity"]
    assert len(rows) == 6
    traj.to_json(tmp_path / "t.json")
    payload = json.loads((tmp_path / "t.json").read_text())
    assert payload["kind"] == "vector" and len(payload["times_us"]) == 5
