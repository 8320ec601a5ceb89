"""CZ and CNOT gates from a double Förster passage.

Two atoms carry qubit levels |0⟩, |1⟩ and a Rydberg level |r⟩ (90S1/2 for
the control, 96S1/2 for the target). A laser π pulse sends |1⟩ → |r⟩ on both
atoms, the electric field sweeps the |rr⟩ pair twice through its Förster
resonance, and a -π pulse brings |r⟩ back. Only |rr⟩ interacts, so only
|11⟩ acquires the passage phase π. The Stark shift of the single Rydberg
levels is compensated by the laser phase of the de-excitation pulse.

The 17-dimensional register basis is

    0:|00⟩ 1:|01⟩ 2:|10⟩ 3:|11⟩ 4:|0r⟩ 5:|r0⟩ 6:|1r⟩ 7:|r1⟩ 8:|rr⟩ 9..16:|PP_k⟩

with the control atom written first. Laser rotations are instantaneous
unitaries unless a Rabi frequency is given. The field ramp is propagated by
:func:`rydberg_arp.dynamics.propagator` including depopulation of every
Rydberg state, so the resulting gate map is a contraction.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence, Union

import numpy as np
from scipy.integrate import quad, trapezoid
from scipy.linalg import expm
from scipy.optimize import minimize_scalar

from ._ode import DEFAULT_ATOL, DEFAULT_RTOL, left_limit, sample_grid
from .angular import RydbergLevel
from .dynamics import (
    LIFETIMES_US,
    DecayChannel,
    ParametricHamiltonian,
    Trajectory,
    propagate_schrodinger,
    propagator,
)
from .forster import ChannelSpec, PairHamiltonian, build_catalog, load_tables
from .pulses import principal_phase
from .stark import (
    TWO_PI,
    DetuningProfile,
    FieldWaveform,
    PolarizabilityTable,
    detuning_series,
    field_from_profile,
)

__all__ = [
    "BELL_STATES",
    "DEFAULT_T2_CORRECTION",
    "BellResult",
    "CalibrationResult",
    "FieldRamp",
    "GateResult",
    "InvalidProfile",
    "PassageRun",
    "PulseSchedule",
    "QubitRegister",
    "Rotation",
    "SweepRow",
    "Wait",
    "bell_fidelities",
    "bell_schedule",
    "bell_state_run",
    "calibrate_t2",
    "cnot_sequence",
    "compile_gate",
    "cz_sequence",
    "default_profile",
    "distance_sweep",
    "fidelity_spread",
    "forster_passage",
    "reconstruct_physical",
    "run_gate",
    "stark_phase_correction",
    "timing_sweep",
    "truth_table",
]

#: t₂ shift (μs) that puts the |rr⟩ phase at π for the bundled 8-channel
#: catalog at R = 25 μm without decay; reproduced by :func:`calibrate_t2`.
DEFAULT_T2_CORRECTION = -6.5268938e-4

_PSD_FLOOR = 1e-12

COMPUTATIONAL = ("00", "01", "10", "11")
_PRODUCT_ORDER = [(0, 0), (0, 1), (1, 0), (1, 1), (0, 2), (2, 0), (1, 2), (2, 1), (2, 2)]
_PRODUCT_INDEX = {p: k for k, p in enumerate(_PRODUCT_ORDER)}
_ATOM_INDEX = {"control": 0, "target": 1}

#: Bell state label -> (computational input, ideal output vector).
BELL_STATES = {
    "phi_plus": (0, np.array([1, 0, 0, 1]) / math.sqrt(2)),
    "phi_minus": (2, np.array([1, 0, 0, -1]) / math.sqrt(2)),
    "psi_plus": (1, np.array([0, 1, 1, 0]) / math.sqrt(2)),
    "psi_minus": (3, np.array([0, 1, -1, 0]) / math.sqrt(2)),
}


class InvalidProfile(ValueError):
    """The detuning profile cannot drive a two-crossing gate."""


def default_profile() -> DetuningProfile:
    """Linear-plus-quintic sweep with crossings at 0.45 and 1.35 μs."""
    return DetuningProfile.from_mhz(-10.0, -2600.0, (0.45, 1.35), 0.45)


def _lifetime_key(level: RydbergLevel) -> str:
    return f"{level.n}{'SPDFGH'[level.l]}"


@dataclass(frozen=True)
class QubitRegister:
    """Two-atom register with the Förster block attached to |rr⟩.

    ``alpha_control``/``alpha_target`` are the Rydberg-level polarizabilities
    (MHz/(V/cm)²); ``lifetimes`` maps ``"90S"``-style keys to μs.
    """

    channels: tuple[ChannelSpec, ...]
    R: float
    alpha_control: float
    alpha_target: float
    lifetimes: tuple[tuple[str, float], ...] = tuple(sorted(LIFETIMES_US.items()))
    c3_unit: str = "angular"

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        if isinstance(self.lifetimes, dict):
            object.__setattr__(self, "lifetimes", tuple(sorted(self.lifetimes.items())))
        if not self.channels:
            raise ValueError("at least one Förster channel is required")

    @classmethod
    def default(cls, R: float = 25.0, channels: Sequence[ChannelSpec] | None = None,
                table: PolarizabilityTable | None = None, **kw) -> "QubitRegister":
        channels = tuple(channels if channels is not None else build_catalog())
        table = table or load_tables().polarizabilities
        ch = channels[0]
        return cls(channels, R, table.alpha(ch.a, ch.two_ma / 2), table.alpha(ch.b, ch.two_mb / 2), **kw)

    @property
    def control_level(self) -> RydbergLevel:
        return self.channels[0].a

    @property
    def target_level(self) -> RydbergLevel:
        return self.channels[0].b

    @property
    def dim(self) -> int:
        return 9 + len(self.channels)

    @property
    def labels(self) -> tuple[str, ...]:
        names = "01r"
        base = [names[i] + names[j] for i, j in _PRODUCT_ORDER]
        return tuple(base + [f"PP[{ch.label}]" for ch in self.channels])

    def pair_hamiltonian(self) -> PairHamiltonian:
        return PairHamiltonian(self.channels, self.R, self.c3_unit)

    def hamiltonian_parts(self) -> tuple[np.ndarray, np.ndarray]:
        """(A, B) with H(t) = A + E(t)² B in rad/μs."""
        n = self.dim
        A = np.zeros((n, n))
        B = np.zeros((n, n))
        sa = -0.5 * TWO_PI * self.alpha_control
        sb = -0.5 * TWO_PI * self.alpha_target
        for (i, j), k in _PRODUCT_INDEX.items():
            B[k, k] = (sa if i == 2 else 0.0) + (sb if j == 2 else 0.0)
        h0, h2 = self.pair_hamiltonian().split()
        block = slice(8, n)
        A[block, block] = h0
        # pair energies are relative to |rr⟩, which carries both single-atom shifts
        B[block, block] = h2 + (sa + sb) * np.eye(n - 8)
        return A, B

    def decays(self) -> list[DecayChannel]:
        life = dict(self.lifetimes)

        def rate(level):
            key = _lifetime_key(level)
            if key not in life:
                raise KeyError(f"no lifetime for {key}")
            return 1.0 / life[key]

        ga, gb = rate(self.control_level), rate(self.target_level)
        out = []
        for (i, j), k in _PRODUCT_INDEX.items():
            g = (ga if i == 2 else 0.0) + (gb if j == 2 else 0.0)
            if g:
                out.append(DecayChannel(k, g))
        for k, ch in enumerate(self.channels, start=9):
            out.append(DecayChannel(k, rate(ch.alpha) + rate(ch.beta)))
        return out

    def embed(self, u_control: np.ndarray, u_target: np.ndarray) -> np.ndarray:
        """Lift single-atom operators on {|0⟩,|1⟩,|r⟩} to the register.

        |PP_k⟩ states are left alone.
        """
        u2 = np.kron(u_control, u_target)
        U = np.eye(self.dim, dtype=complex)
        idx = [_PRODUCT_INDEX[(i, j)] for i in range(3) for j in range(3)]
        U[np.ix_(idx, idx)] = u2
        return U


def _pauli_n(phi: float) -> np.ndarray:
    return np.array([[0.0, np.exp(-1j * phi)], [np.exp(1j * phi), 0.0]])


@dataclass(frozen=True)
class Rotation:
    """Laser rotation R(θ, φ) = exp(-iθ/2 (cos φ X + sin φ Y)) on one atom.

    ``transition`` selects the qubit pair (|0⟩, |1⟩) or the Rydberg pair
    (|1⟩, |r⟩). With ``rabi`` (rad/μs) set the pulse lasts |θ|/rabi and
    Rydberg decay acts during it; otherwise it is instantaneous.
    """

    atom: str
    theta: float
    phi: float = 0.0
    transition: str = "rydberg"
    rabi: float | None = None

    def __post_init__(self):
        if self.atom not in _ATOM_INDEX:
            raise ValueError(f"atom must be one of {tuple(_ATOM_INDEX)}")
        if self.transition not in ("qubit", "rydberg"):
            raise ValueError("transition must be 'qubit' or 'rydberg'")
        if self.rabi is not None and self.rabi <= 0:
            raise ValueError("rabi must be positive")

    @property
    def duration(self) -> float:
        return 0.0 if self.rabi is None else abs(self.theta) / self.rabi

    def generator(self) -> np.ndarray:
        """Single-atom operator (cos φ X + sin φ Y)/2 on the chosen pair."""
        g = np.zeros((3, 3), dtype=complex)
        sl = slice(0, 2) if self.transition == "qubit" else slice(1, 3)
        g[sl, sl] = 0.5 * _pauli_n(self.phi)
        return g

    def single_atom(self) -> np.ndarray:
        return expm(-1j * self.theta * self.generator())


@dataclass(frozen=True)
class FieldRamp:
    """Electric-field ramp realising ``waveform`` over its time span."""

    waveform: FieldWaveform

    @property
    def duration(self) -> float:
        return self.waveform.profile.duration


@dataclass(frozen=True)
class Wait:
    """Free evolution (no field, only decay)."""

    duration: float

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError("wait duration must be non-negative")


Event = Union[Rotation, FieldRamp, Wait]


@dataclass(frozen=True)
class PulseSchedule:
    """Ordered, back-to-back gate events; ``name`` is informational."""

    events: tuple[Event, ...]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))

    @property
    def start_times(self) -> list[float]:
        t, out = 0.0, []
        for ev in self.events:
            out.append(t)
            t += ev.duration
        return out

    @property
    def duration(self) -> float:
        return sum(ev.duration for ev in self.events)

    @property
    def ramps(self) -> list[FieldRamp]:
        return [ev for ev in self.events if isinstance(ev, FieldRamp)]


def stark_phase_correction(level: RydbergLevel | float, waveform, *, table: PolarizabilityTable | None = None,
                           mj: float = 0.5, method: str = "trapezoid", dt: float = 1e-4) -> float:
    """Laser phase offset φ = -∫ ΔE_Stark(t) dt cancelling a level's Stark phase.

    ``level`` is a :class:`RydbergLevel` looked up in ``table`` (the bundled
    table by default) or a bare polarizability in MHz/(V/cm)². ``method`` is
    ``"trapezoid"`` on a grid of step ``dt`` or ``"quad"`` (adaptive).
    """
    if isinstance(level, RydbergLevel):
        table = table or load_tables().polarizabilities
        alpha = table.alpha(level, mj)
    else:
        alpha = float(level)
    prof = waveform.profile
    pts = [prof.t_span[0], *prof.breakpoints(), prof.t_span[1]]
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        if method == "quad":
            edge = left_limit(b)
            val, _ = quad(lambda t: float(waveform.field_squared(min(t, edge))), a, b,
                          epsabs=1e-13, epsrel=1e-13, limit=400)
        elif method == "trapezoid":
            t = sample_grid(a, b, dt)
            e2 = waveform.field_squared(np.minimum(t, left_limit(b)))
            val = float(trapezoid(e2, t))
        else:
            raise ValueError("method must be 'trapezoid' or 'quad'")
        total += val
    return 0.5 * TWO_PI * alpha * total


def _check_profile(profile: DetuningProfile) -> None:
    if profile is None or len(profile.crossing_times) != 2:
        raise InvalidProfile("a gate needs a detuning profile with exactly two crossings")
    if not profile.duration > 0:
        raise InvalidProfile("profile has zero duration")


def _core_events(register: QubitRegister, profile: DetuningProfile, t2_correction: float,
                 rabi: float | None, correct_phase: bool):
    _check_profile(profile)
    prof = profile.shifted(1, t2_correction) if t2_correction else profile
    wf = field_from_profile(prof, register.channels[0])
    if correct_phase:
        phi_c = stark_phase_correction(register.alpha_control, wf)
        phi_t = stark_phase_correction(register.alpha_target, wf)
    else:
        phi_c = phi_t = 0.0
    return [
        Rotation("control", math.pi, 0.0, rabi=rabi),
        Rotation("target", math.pi, 0.0, rabi=rabi),
        FieldRamp(wf),
        Rotation("control", -math.pi, phi_c, rabi=rabi),
        Rotation("target", -math.pi, phi_t, rabi=rabi),
    ]


def cz_sequence(R: float = 25.0, profile: DetuningProfile | None = None,
                t2_correction: float = DEFAULT_T2_CORRECTION, *, register: QubitRegister | None = None,
                rabi: float | None = None, correct_phase: bool = True) -> PulseSchedule:
    """π excitation of both atoms, field ramp, phase-corrected -π de-excitation.

    ``t2_correction`` (μs) moves the second crossing. ``R`` is ignored when
    ``register`` is given.
    """
    register = register or QubitRegister.default(R)
    profile = default_profile() if profile is None else profile
    return PulseSchedule(tuple(_core_events(register, profile, t2_correction, rabi, correct_phase)), "CZ")


def cnot_sequence(R: float = 25.0, profile: DetuningProfile | None = None,
                  t2_correction: float = DEFAULT_T2_CORRECTION, *, register: QubitRegister | None = None,
                  rabi: float | None = None, correct_phase: bool = True) -> PulseSchedule:
    """CZ wrapped in R_y(-π/2) and R_y(+π/2) on the target qubit."""
    register = register or QubitRegister.default(R)
    profile = default_profile() if profile is None else profile
    core = _core_events(register, profile, t2_correction, rabi, correct_phase)
    pre = Rotation("target", -math.pi / 2, math.pi / 2, "qubit", rabi)
    post = Rotation("target", math.pi / 2, math.pi / 2, "qubit", rabi)
    return PulseSchedule((pre, *core, post), "CNOT")


def _rotation_map(rot: Rotation, register: QubitRegister, gamma: np.ndarray) -> np.ndarray:
    eye = np.eye(3)
    if rot.rabi is None:
        u = rot.single_atom()
        return register.embed(u, eye) if rot.atom == "control" else register.embed(eye, u)
    gen_full = _embed_generator(rot.generator(), rot.atom, register)
    heff = rot.rabi * np.sign(rot.theta) * gen_full - 0.5j * np.diag(gamma)
    return expm(-1j * heff * rot.duration)


def _embed_generator(g: np.ndarray, atom: str, register: QubitRegister) -> np.ndarray:
    full = np.kron(g, np.eye(3)) if atom == "control" else np.kron(np.eye(3), g)
    out = np.zeros((register.dim, register.dim), dtype=complex)
    idx = [_PRODUCT_INDEX[(i, j)] for i in range(3) for j in range(3)]
    out[np.ix_(idx, idx)] = full
    return out


@lru_cache(maxsize=64)
def _ramp_map(register: QubitRegister, waveform: FieldWaveform, decay: bool, rtol: float, atol: float):
    A, B = register.hamiltonian_parts()
    H = ParametricHamiltonian(A, B, waveform.envelope,
                              tuple(waveform.breakpoints()))
    decays = register.decays() if decay else ()
    return propagator(H, register.dim, waveform.t_span, decays=decays, rtol=rtol, atol=atol)


def compile_gate(schedule: PulseSchedule, register: QubitRegister | None = None, *, decay: bool = True,
                 rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> np.ndarray:
    """Register-space map M of the whole schedule; ρ → M ρ M†.

    Field-ramp propagators are cached per (register, waveform, decay,
    tolerances).
    """
    register = register or QubitRegister.default()
    gamma = np.zeros(register.dim)
    if decay:
        for d in register.decays():
            gamma[d.index] += d.rate
    M = np.eye(register.dim, dtype=complex)
    for ev in schedule.events:
        if isinstance(ev, Rotation):
            U = _rotation_map(ev, register, gamma if decay else np.zeros_like(gamma))
        elif isinstance(ev, FieldRamp):
            U = _ramp_map(register, ev.waveform, decay, rtol, atol)
        elif isinstance(ev, Wait):
            U = np.diag(np.exp(-0.5 * gamma * ev.duration)).astype(complex)
        else:
            raise TypeError(f"unknown event {ev!r}")
        M = U @ M
    return M


def _initial_density(initial, dim: int) -> np.ndarray:
    if isinstance(initial, str):
        initial = COMPUTATIONAL.index(initial)
    if isinstance(initial, (int, np.integer)):
        v = np.zeros(4, dtype=complex)
        v[int(initial)] = 1.0
        initial = v
    x = np.asarray(initial, dtype=complex)
    if x.ndim == 1:
        if x.shape != (4,):
            raise ValueError("superpositions are given on the 4 computational states")
        if abs(np.linalg.norm(x) - 1.0) > 1e-10:
            raise ValueError("initial state must be normalised")
        x = np.outer(x, x.conj())
    if x.shape != (4, 4):
        raise ValueError("initial density matrix must be 4x4")
    rho = np.zeros((dim, dim), dtype=complex)
    rho[:4, :4] = x
    return rho


@dataclass
class GateRun:
    """Output of one gate run; ``rho`` is the full register density matrix."""

    rho: np.ndarray

    @property
    def computational(self) -> np.ndarray:
        return self.rho[:4, :4]

    @property
    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.computational))

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.rho)))


def run_gate(schedule: PulseSchedule, initial=0, *, decay: bool = True,
             register: QubitRegister | None = None, gate_map: np.ndarray | None = None) -> GateRun:
    """Apply the schedule to a computational input.

    ``initial`` is an index 0-3, a label such as ``"11"``, a 4-vector or a
    4×4 density matrix.
    """
    register = register or QubitRegister.default()
    M = compile_gate(schedule, register, decay=decay) if gate_map is None else gate_map
    rho = _initial_density(initial, register.dim)
    out = M @ rho @ M.conj().T
    return GateRun(0.5 * (out + out.conj().T))


@dataclass
class GateResult:
    """Truth table (rows: inputs 00, 01, 10, 11) and derived figures."""

    name: str
    truth_table: np.ndarray
    ideal: tuple[int, ...]
    overlap: float
    phases: dict
    bell_fidelities: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "truth_table": self.truth_table.tolist(), "ideal": list(self.ideal),
                "overlap": self.overlap, "phases_rad": self.phases, "bell_fidelities": self.bell_fidelities}


def _ideal_permutation(schedule: PulseSchedule) -> tuple[int, ...]:
    return (0, 1, 3, 2) if schedule.name == "CNOT" else (0, 1, 2, 3)


def truth_table(schedule: PulseSchedule, *, decay: bool = True, register: QubitRegister | None = None,
                gate_map: np.ndarray | None = None) -> GateResult:
    """Populations of each computational output for each computational input.

    The overlap is the mean population of the ideal output,
    (1/4) Σ_k ⟨ideal_k|ρ_out(k)|ideal_k⟩.
    """
    register = register or QubitRegister.default()
    M = compile_gate(schedule, register, decay=decay) if gate_map is None else gate_map
    tt = np.array([run_gate(schedule, k, register=register, gate_map=M).populations for k in range(4)])
    ideal = _ideal_permutation(schedule)
    overlap = float(np.mean([tt[k, ideal[k]] for k in range(4)]))
    d = np.diag(M)[:4]
    phases = {lab: float(np.angle(d[k] * d[0].conj())) for k, lab in enumerate(COMPUTATIONAL)}
    return GateResult(schedule.name, tt, ideal, overlap, phases)


def reconstruct_physical(rho_raw: np.ndarray) -> np.ndarray:
    """Closest positive semidefinite matrix with the same trace.

    Negative eigenvalues are zeroed one at a time from the bottom and their
    weight spread evenly over the remaining ones (the maximum-likelihood
    projection for Gaussian noise). Physical inputs, including those with
    round-off eigenvalues down to -1e-12, are returned unchanged.
    """
    rho = np.asarray(rho_raw, dtype=complex)
    if np.linalg.norm(rho - rho.conj().T) > 1e-10 * max(1.0, np.linalg.norm(rho)):
        raise ValueError("input must be Hermitian")
    herm = 0.5 * (rho + rho.conj().T)
    w, v = np.linalg.eigh(herm)
    # eigenvalues of rank-deficient physical states scatter around zero
    if w[0] >= -_PSD_FLOOR * max(1.0, abs(w[-1])):
        return rho.copy()
    if np.sum(w) <= 0:
        raise ValueError("no positive semidefinite matrix has a non-positive trace")
    lam = w.copy()
    n = len(lam)
    acc = 0.0
    i = 0
    # lam is ascending
    while i < n and lam[i] + acc / (n - i) < 0:
        acc += lam[i]
        lam[i] = 0.0
        i += 1
    lam[i:] += acc / (n - i)
    out = (v * lam) @ v.conj().T
    return 0.5 * (out + out.conj().T)


@dataclass
class BellResult:
    """Bell-state preparation outcome at the gate output."""

    which: str
    fidelity: float
    fidelity_reconstructed: float
    rho: np.ndarray
    rho_reconstructed: np.ndarray

    def to_dict(self) -> dict:
        return {"state": self.which, "fidelity": self.fidelity,
                "fidelity_reconstructed": self.fidelity_reconstructed,
                "rho_re": self.rho.real.tolist(), "rho_im": self.rho.imag.tolist(),
                "rho_reconstructed_re": self.rho_reconstructed.real.tolist(),
                "rho_reconstructed_im": self.rho_reconstructed.imag.tolist()}


def bell_schedule(cnot: PulseSchedule) -> PulseSchedule:
    """R_y(π/2) on the control followed by the CNOT.

    Inputs |00⟩, |10⟩, |01⟩, |11⟩ then give Φ+, -Φ-, Ψ+, -Ψ-; the signs are
    global phases.
    """
    rabi = next((ev.rabi for ev in cnot.events if isinstance(ev, Rotation)), None)
    h = Rotation("control", math.pi / 2, math.pi / 2, "qubit", rabi)
    return PulseSchedule((h, *cnot.events), "BELL")


def bell_fidelity(rho4: np.ndarray, which: str) -> float:
    psi = BELL_STATES[which][1]
    return float(np.real(psi.conj() @ rho4 @ psi))


def bell_state_run(which: str, R: float = 25.0, *, decay: bool = True,
                   t2_correction: float = DEFAULT_T2_CORRECTION, profile: DetuningProfile | None = None,
                   register: QubitRegister | None = None, gate_map: np.ndarray | None = None) -> BellResult:
    """Prepare a Bell state with R_y(π/2) + CNOT and score it.

    The fidelity ⟨ψ|ρ|ψ⟩ is evaluated on the sub-normalised computational
    block, before and after :func:`reconstruct_physical`.
    """
    if which not in BELL_STATES:
        raise ValueError(f"unknown Bell state {which!r}; expected one of {tuple(BELL_STATES)}")
    register = register or QubitRegister.default(R)
    sched = bell_schedule(cnot_sequence(register=register, profile=profile, t2_correction=t2_correction))
    M = compile_gate(sched, register, decay=decay) if gate_map is None else gate_map
    rho = run_gate(sched, BELL_STATES[which][0], register=register, gate_map=M).computational
    rec = reconstruct_physical(rho)
    return BellResult(which, bell_fidelity(rho, which), bell_fidelity(rec, which), rho, rec)


def bell_fidelities(register: QubitRegister, *, decay: bool = True, t2_correction: float = DEFAULT_T2_CORRECTION,
                    profile: DetuningProfile | None = None) -> dict[str, BellResult]:
    sched = bell_schedule(cnot_sequence(register=register, profile=profile, t2_correction=t2_correction))
    M = compile_gate(sched, register, decay=decay)
    return {w: bell_state_run(w, register=register, gate_map=M, decay=decay) for w in BELL_STATES}


@dataclass
class PassageRun:
    """9-level Förster passage of the |rr⟩ pair started in |rr⟩."""

    trajectory: Trajectory
    waveform: FieldWaveform
    channels: tuple[ChannelSpec, ...]

    @property
    def population(self) -> float:
        return float(abs(self.trajectory.final[0]) ** 2)

    @property
    def phase(self) -> float:
        return principal_phase(np.angle(self.trajectory.final[0]))

    def field_table(self) -> np.ndarray:
        """Columns t, E(t) in V/cm, Δ_k(E(t))/2π in MHz."""
        t = self.trajectory.times
        E = self.waveform(t)
        return np.column_stack([t, E, detuning_series(self.channels, self.waveform, t) / TWO_PI])


def forster_passage(R: float = 25.0, *, profile: DetuningProfile | None = None,
                    t2_correction: float = DEFAULT_T2_CORRECTION,
                    channels: Sequence[ChannelSpec] | None = None, dt: float | None = 1e-3,
                    rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> PassageRun:
    """Propagate the pair block alone (no decay), from |rr⟩.

    The |rr⟩ energy is the reference, so the reported phase is the
    interaction phase only; single-atom Stark phases are not included.
    With ``dt=None`` only the final state is kept.
    """
    channels = tuple(channels if channels is not None else build_catalog())
    profile = default_profile() if profile is None else profile
    _check_profile(profile)
    prof = profile.shifted(1, t2_correction) if t2_correction else profile
    wf = field_from_profile(prof, channels[0])
    h0, h2 = PairHamiltonian(channels, R).split()
    H = ParametricHamiltonian(h0, h2, wf.envelope, tuple(wf.breakpoints()))
    psi0 = np.zeros(len(channels) + 1)
    psi0[0] = 1.0
    grid = None if dt is None else np.unique(np.concatenate(
        [sample_grid(*wf.t_span, dt), wf.breakpoints()]))
    traj = propagate_schrodinger(H, psi0, wf.t_span, t_eval=grid, rtol=rtol, atol=atol,
                                 labels=tuple(PairHamiltonian(channels, R).basis.labels))
    return PassageRun(traj, wf, channels)


@dataclass
class CalibrationResult:
    t2_correction: float
    phase: float
    population: float
    evaluations: int


def calibrate_t2(R: float = 25.0, *, profile: DetuningProfile | None = None,
                 channels: Sequence[ChannelSpec] | None = None, bounds=(-3e-3, 3e-3),
                 xatol: float = 1e-9, rtol: float = 1e-10, atol: float = 1e-12) -> CalibrationResult:
    """Shift of the second crossing (μs) that makes the |rr⟩ phase π.

    Minimises 1 - cos(φ - π) of the decay-free pair passage over
    ``bounds`` with a bounded scalar search.
    """
    channels = tuple(channels if channels is not None else build_catalog())

    def cost(dt):
        run = forster_passage(R, profile=profile, t2_correction=dt, channels=channels, dt=None,
                              rtol=rtol, atol=atol)
        return 1.0 - math.cos(run.phase - math.pi)

    res = minimize_scalar(cost, bounds=bounds, method="bounded", options={"xatol": xatol})
    run = forster_passage(R, profile=profile, t2_correction=res.x, channels=channels, dt=None)
    return CalibrationResult(float(res.x), run.phase, run.population, int(res.nfev))


@dataclass
class SweepRow:
    """Gate figures at one parameter value."""

    R: float
    t2_correction: float
    overlap: float
    bell: dict
    phase_11: float

    @property
    def min_bell(self) -> float:
        return min(self.bell.values())

    def to_dict(self) -> dict:
        return {"R_um": self.R, "t2_correction_us": self.t2_correction, "overlap": self.overlap,
                "bell_fidelities": self.bell, "phase_11_rad": self.phase_11}


def _sweep_point(args) -> SweepRow:
    R, t2c, decay, channels, profile = args
    register = QubitRegister.default(R, channels)
    cnot = cnot_sequence(register=register, profile=profile, t2_correction=t2c)
    tt = truth_table(cnot, decay=decay, register=register)
    cz = truth_table(cz_sequence(register=register, profile=profile, t2_correction=t2c),
                     decay=decay, register=register)
    bell = {w: r.fidelity for w, r in bell_fidelities(register, decay=decay, t2_correction=t2c,
                                                      profile=profile).items()}
    return SweepRow(float(R), float(t2c), tt.overlap, bell, cz.phases["11"])


def _run_points(points, workers):
    if workers and workers > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_point, points))
    return [_sweep_point(p) for p in points]


def distance_sweep(R_list: Sequence[float], *, t2_correction: float = DEFAULT_T2_CORRECTION,
                   decay: bool = True, channels: Sequence[ChannelSpec] | None = None,
                   profile: DetuningProfile | None = None, workers: int | None = None) -> list[SweepRow]:
    """CNOT overlap, Bell fidelities and CZ phase versus distance, sorted by R.

    Each point is independent; with ``workers > 1`` they run in a process
    pool and the result is identical to the serial one.
    """
    if len(R_list) == 0:
        raise ValueError("R_list must not be empty")
    channels = tuple(channels if channels is not None else build_catalog())
    points = [(float(R), t2_correction, decay, channels, profile) for R in sorted(set(R_list))]
    return _run_points(points, workers)


def timing_sweep(deltas: Sequence[float], R: float = 25.0, *, t2_correction: float = DEFAULT_T2_CORRECTION,
                 decay: bool = True, channels: Sequence[ChannelSpec] | None = None,
                 profile: DetuningProfile | None = None, workers: int | None = None) -> list[SweepRow]:
    """Gate figures with the second crossing displaced by each ``delta`` (μs)."""
    if len(deltas) == 0:
        raise ValueError("deltas must not be empty")
    channels = tuple(channels if channels is not None else build_catalog())
    points = [(float(R), t2_correction + float(d), decay, channels, profile) for d in sorted(set(deltas))]
    return _run_points(points, workers)


def fidelity_spread(rows: Sequence[SweepRow], center: float = 25.0, half_width: float = 0.15,
                    metric: str = "overlap") -> float:
    """Max minus min of ``metric`` over rows with |R - center| ≤ half_width."""
    vals = [r.overlap if metric == "overlap" else r.min_bell for r in rows
            if abs(r.R - center) <= half_width + 1e-12]
    if not vals:
        raise ValueError("no rows inside the window")
    return float(max(vals) - min(vals))
