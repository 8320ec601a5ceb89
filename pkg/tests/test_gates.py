import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import unitary_group

from rydberg_arp.angular import RydbergLevel
from rydberg_arp.gates import (
    BELL_STATES,
    DEFAULT_T2_CORRECTION,
    InvalidProfile,
    PulseSchedule,
    QubitRegister,
    Rotation,
    Wait,
    bell_fidelities,
    bell_schedule,
    bell_state_run,
    calibrate_t2,
    cnot_sequence,
    compile_gate,
    cz_sequence,
    default_profile,
    distance_sweep,
    fidelity_spread,
    reconstruct_physical,
    run_gate,
    stark_phase_correction,
    truth_table,
)
from rydberg_arp.gates import bell_fidelity
from rydberg_arp.stark import DetuningProfile, FieldWaveform, field_from_profile

TWO_PI = 2 * math.pi


@pytest.fixture(scope="module")
def ideal_register(catalog):
    # channel 1 alone is the symmetric two-level passage, whose phase is exactly π
    return QubitRegister.default(25.0, channels=catalog[:1])


@pytest.fixture(scope="module")
def full_register(catalog):
    return QubitRegister.default(25.0, channels=catalog)


# -- register and schedules ----------------------------------------------------

def test_register_layout(full_register):
    assert full_register.dim == 17
    assert full_register.labels[:9] == ("00", "01", "10", "11", "0r", "r0", "1r", "r1", "rr")
    assert full_register.alpha_control == 3505.0
    assert full_register.alpha_target == 5529.0
    assert str(full_register.control_level) == "90S1/2"


def test_forster_block_reachable_only_from_rr(full_register):
    A, B = full_register.hamiltonian_parts()
    H = A + 0.03**2 * B
    assert np.array_equal(H, H.T)
    off = H - np.diag(np.diag(H))
    rows = set(np.nonzero(off)[0])
    assert rows == set(range(8, 17))
    assert np.count_nonzero(off[8, 9:]) == 8
    assert np.all(off[9:, 9:] == 0)


def test_register_decays(full_register):
    rates = {d.index: d.rate for d in full_register.decays()}
    assert rates[8] == pytest.approx(1 / 270 + 1 / 314)
    assert rates[4] == pytest.approx(1 / 314)
    assert rates[5] == pytest.approx(1 / 270)
    assert rates[9] == pytest.approx(1 / 361 + 1 / 406)
    assert not any(k in rates for k in range(4))


def test_cz_schedule_structure(full_register):
    cz = cz_sequence(register=full_register)
    kinds = [type(e).__name__ for e in cz.events]
    assert kinds == ["Rotation", "Rotation", "FieldRamp", "Rotation", "Rotation"]
    assert cz.duration == pytest.approx(1.8 + DEFAULT_T2_CORRECTION)
    assert cz.ramps[0].waveform.profile.crossing_times == pytest.approx((0.45, 1.35 + DEFAULT_T2_CORRECTION))
    starts = cz.start_times
    assert all(b >= a for a, b in zip(starts, starts[1:]))


def test_paper_t2_shift(full_register):
    cz = cz_sequence(register=full_register, t2_correction=0.6e-3)
    assert cz.ramps[0].waveform.profile.crossing_times[1] == pytest.approx(1.3506)


def test_cnot_schedule_wraps_target_rotations(full_register):
    cnot = cnot_sequence(register=full_register)
    first, last = cnot.events[0], cnot.events[-1]
    assert (first.atom, first.transition, first.theta) == ("target", "qubit", -math.pi / 2)
    assert (last.atom, last.transition, last.theta) == ("target", "qubit", math.pi / 2)
    assert len(cnot.events) == 7


def test_invalid_profiles(full_register):
    single = DetuningProfile.from_mhz(-10.0, -2600.0, (0.45,), 0.45)
    with pytest.raises(InvalidProfile):
        cz_sequence(register=full_register, profile=single)
    with pytest.raises(InvalidProfile):
        cnot_sequence(register=full_register, profile=single)


def test_event_validation():
    with pytest.raises(ValueError):
        Rotation("both", math.pi)
    with pytest.raises(ValueError):
        Rotation("control", math.pi, transition="raman")
    with pytest.raises(ValueError):
        Rotation("control", math.pi, rabi=-1.0)
    with pytest.raises(ValueError):
        Wait(-0.1)


def test_rotation_conventions():
    x = Rotation("control", math.pi, 0.0, "qubit").single_atom()
    assert x[:2, :2] == pytest.approx(np.array([[0, -1j], [-1j, 0]]))
    y = Rotation("control", math.pi / 2, math.pi / 2, "qubit").single_atom()
    assert y[:2, :2] == pytest.approx(np.array([[1, -1], [1, 1]]) / math.sqrt(2))
    r = Rotation("target", math.pi).single_atom()
    assert r[0, 0] == 1 and abs(r[2, 1]) == pytest.approx(1.0)


# -- Stark phase compensation --------------------------------------------------

def test_stark_phase_zero_field():
    flat = DetuningProfile(0.0, 0.0, (0.0,), (1.0,))
    wf = FieldWaveform(flat, 0.0, 1e5)
    assert stark_phase_correction(3505.0, wf) == 0.0


def test_stark_phase_constant_field():
    flat = DetuningProfile(0.0, 0.0, (0.5,), (0.5,))
    delta0, alpha_pair = TWO_PI * 75.61, 170857.0
    wf = FieldWaveform(flat, delta0, alpha_pair)
    E2 = 2 * delta0 / (TWO_PI * alpha_pair)
    expected = TWO_PI * 3505.0 * E2 * 1.0 / 2
    assert stark_phase_correction(3505.0, wf) == pytest.approx(expected, rel=1e-13)
    assert stark_phase_correction(3505.0, wf, method="quad") == pytest.approx(expected, rel=1e-13)


def test_stark_phase_trapezoid_vs_quad(catalog):
    wf = field_from_profile(default_profile(), catalog[0])
    s90 = RydbergLevel.parse("90S1/2")
    trap = stark_phase_correction(s90, wf)
    adaptive = stark_phase_correction(s90, wf, method="quad")
    assert abs(trap - adaptive) < 1e-9
    with pytest.raises(ValueError):
        stark_phase_correction(s90, wf, method="simpson")


def test_stark_phase_missing_polarizability(catalog):
    from rydberg_arp.stark import MissingPolarizability
    wf = field_from_profile(default_profile(), catalog[0])
    with pytest.raises(MissingPolarizability):
        stark_phase_correction(RydbergLevel.parse("91S1/2"), wf)


# -- ideal limit ---------------------------------------------------------------

def test_ideal_cz_is_diagonal(ideal_register):
    cz = cz_sequence(register=ideal_register, t2_correction=0.0)
    tt = truth_table(cz, decay=False, register=ideal_register)
    assert tt.truth_table == pytest.approx(np.eye(4), abs=1e-3)
    assert tt.phases["01"] == pytest.approx(0.0, abs=1e-6)
    assert tt.phases["10"] == pytest.approx(0.0, abs=1e-6)
    assert abs(tt.phases["11"]) == pytest.approx(math.pi, abs=1e-6)


def test_ideal_cnot_limit(ideal_register):
    cnot = cnot_sequence(register=ideal_register, t2_correction=0.0)
    M = compile_gate(cnot, ideal_register, decay=False)
    U = M[:4, :4]
    ideal = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
    # compare up to a global phase
    phase = np.vdot(ideal.ravel(), U.ravel())
    assert np.max(np.abs(U - ideal * phase / abs(phase))) < 1e-3
    assert truth_table(cnot, decay=False, register=ideal_register, gate_map=M).overlap > 0.999


def test_ideal_bell_states(ideal_register):
    res = bell_fidelities(ideal_register, decay=False, t2_correction=0.0)
    assert set(res) == set(BELL_STATES)
    assert all(r.fidelity > 0.999 for r in res.values())


def test_calibration_finds_symmetric_point(catalog):
    cal = calibrate_t2(channels=catalog[:1], bounds=(-1e-3, 1e-3))
    assert abs(cal.t2_correction) < 1e-6
    assert cal.phase == pytest.approx(math.pi, abs=1e-6)


# -- full catalog ---------------------------------------------------------------

@pytest.fixture(scope="module")
def full_cz_map(full_register):
    return compile_gate(cz_sequence(register=full_register), full_register, decay=False)


def test_cz_phases_decay_off(full_register, full_cz_map):
    cz = cz_sequence(register=full_register)
    tt = truth_table(cz, decay=False, register=full_register, gate_map=full_cz_map)
    assert abs(tt.phases["11"]) == pytest.approx(math.pi, abs=0.02)
    assert tt.phases["01"] == pytest.approx(0.0, abs=1e-6)
    off_target = tt.truth_table - np.diag(np.diag(tt.truth_table))
    assert np.max(off_target) < 1e-3


def test_norm_conserved_decay_off(full_register, full_cz_map):
    cz = cz_sequence(register=full_register)
    for k in range(4):
        assert run_gate(cz, k, register=full_register, gate_map=full_cz_map).trace == pytest.approx(1.0, abs=1e-8)


def test_cnot_truth_table_logic(full_register):
    cnot = cnot_sequence(register=full_register)
    tt = truth_table(cnot, decay=True, register=full_register)
    rows = tt.truth_table
    assert np.argmax(rows[0]) == 0 and np.argmax(rows[1]) == 1
    assert np.argmax(rows[2]) == 3 and np.argmax(rows[3]) == 2
    assert np.all(rows.sum(axis=1) <= 1 + 1e-12)
    assert 0 <= tt.overlap <= 1


def test_decay_makes_a_contraction(full_register):
    M = compile_gate(cnot_sequence(register=full_register), full_register, decay=True)
    assert np.max(np.linalg.svd(M, compute_uv=False)) <= 1 + 1e-9


def test_run_gate_inputs(full_register, full_cz_map):
    cz = cz_sequence(register=full_register)
    a = run_gate(cz, "11", register=full_register, gate_map=full_cz_map)
    b = run_gate(cz, 3, register=full_register, gate_map=full_cz_map)
    c = run_gate(cz, np.array([0, 0, 0, 1.0]), register=full_register, gate_map=full_cz_map)
    assert np.allclose(a.rho, b.rho) and np.allclose(a.rho, c.rho)
    with pytest.raises(ValueError):
        run_gate(cz, np.array([1.0, 1.0, 0, 0]), register=full_register, gate_map=full_cz_map)
    with pytest.raises(ValueError):
        run_gate(cz, np.eye(3), register=full_register, gate_map=full_cz_map)


def test_finite_rotations_approach_instantaneous(ideal_register):
    fast = cz_sequence(register=ideal_register, t2_correction=0.0, rabi=TWO_PI * 1e4)
    inst = cz_sequence(register=ideal_register, t2_correction=0.0)
    Mf = compile_gate(fast, ideal_register, decay=True)
    Mi = compile_gate(inst, ideal_register, decay=True)
    assert fast.duration > inst.duration
    assert np.linalg.norm(Mf[:4, :4] - Mi[:4, :4]) < 1e-4


def test_wait_only_decays(ideal_register):
    sched = PulseSchedule((Rotation("control", math.pi), Wait(10.0)), "probe")
    rho = run_gate(sched, "10", register=ideal_register).rho
    assert np.real(rho[5, 5]) == pytest.approx(math.exp(-10.0 / 270), rel=1e-12)


def test_bell_schedule_prepends_control_rotation(full_register):
    cnot = cnot_sequence(register=full_register)
    sched = bell_schedule(cnot)
    assert sched.events[0].atom == "control" and sched.events[1:] == cnot.events
    with pytest.raises(ValueError):
        bell_state_run("ghz", register=full_register)


def test_distance_sweep_parallel_matches_serial(catalog):
    serial = distance_sweep([25.0, 24.0], channels=catalog[:1], t2_correction=0.0)
    parallel = distance_sweep([24.0, 25.0], channels=catalog[:1], t2_correction=0.0, workers=2)
    assert [r.R for r in serial] == [24.0, 25.0]
    assert [r.to_dict() for r in serial] == [r.to_dict() for r in parallel]
    single = distance_sweep([25.0], channels=catalog[:1], t2_correction=0.0)
    assert len(single) == 1
    assert fidelity_spread(single, 25.0) == 0.0
    with pytest.raises(ValueError):
        distance_sweep([])
    with pytest.raises(ValueError):
        fidelity_spread(single, 30.0)


# -- reconstruction ------------------------------------------------------------

def test_reconstruct_example():
    out = reconstruct_physical(np.diag([1.1, -0.1]))
    assert out == pytest.approx(np.diag([1.0, 0.0]), abs=1e-15)


def test_reconstruct_rejects_non_hermitian():
    with pytest.raises(ValueError):
        reconstruct_physical(np.array([[0.5, 0.2], [0.0, 0.5]]))


def _random_density(seed, n=4, rank=None):
    rng = np.random.default_rng(seed)
    rank = rank or n
    X = rng.normal(size=(n, rank)) + 1j * rng.normal(size=(n, rank))
    rho = X @ X.conj().T
    return rho / np.trace(rho).real


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_reconstruct_idempotent_on_physical(seed, rank):
    rho = _random_density(seed, rank=rank)
    assert np.array_equal(reconstruct_physical(rho), rho)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 0.5))
def test_reconstruct_postconditions(seed, noise):
    rng = np.random.default_rng(seed)
    rho = _random_density(seed)
    N = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    raw = rho + noise * (N + N.conj().T) / 2
    if np.trace(raw).real <= 0:
        with pytest.raises(ValueError):
            reconstruct_physical(raw)
        return
    out = reconstruct_physical(raw)
    w = np.linalg.eigvalsh(out)
    assert np.min(w) >= -1e-12 * max(1.0, np.max(w))
    assert np.trace(out).real == pytest.approx(np.trace(raw).real, abs=1e-12)
    assert np.array_equal(out, out.conj().T)
    # second pass changes nothing
    assert np.allclose(reconstruct_physical(out), out, atol=1e-12)
    # distance to any physical state grows by at most twice the clipped mass
    neg = -np.sum(np.minimum(np.linalg.eigvalsh(raw), 0))
    sigma = _random_density(seed + 1)
    assert np.linalg.norm(out - sigma) <= np.linalg.norm(raw - sigma) + 2 * neg + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 2 * math.pi), st.sampled_from(sorted(BELL_STATES)))
def test_bell_fidelity_global_phase_invariant(chi, which):
    U = unitary_group.rvs(4, random_state=7)
    psi = U[:, 0]
    a = bell_fidelity(np.outer(psi, psi.conj()), which)
    psi2 = np.exp(1j * chi) * psi
    b = bell_fidelity(reconstruct_physical(np.outer(psi2, psi2.conj())), which)
    assert a == pytest.approx(b, abs=1e-13)
