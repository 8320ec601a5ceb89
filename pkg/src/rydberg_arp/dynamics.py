"""Schrödinger and depopulation master-equation propagation.

Decay is modelled as loss only: each basis state ``r`` leaks at rate γ_r
through the anticommutator term -1/2 Σ γ_r {|r⟩⟨r|, ρ}, with nothing
refilled. The master equation is then equivalent to evolution under the
non-Hermitian Hamiltonian H_eff = H - (i/2) diag(γ), ρ → U ρ U† with

    dU/dt = -i H_eff U,

so the trace of ρ can only decrease. :func:`propagate_master` integrates ρ
directly; :func:`propagator` returns U, which is what the gate compiler
uses because one U serves every initial state.

Hamiltonians are callables ``H(t) -> (N, N) array`` in rad/μs. Real
symmetric ones take a faster real-arithmetic path.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ._ode import DEFAULT_ATOL, DEFAULT_RTOL, StepSizeUnderflow, integrate_segments

__all__ = [
    "LIFETIMES_US",
    "DecayChannel",
    "Observables",
    "ParametricHamiltonian",
    "QuantumState",
    "StepSizeUnderflow",
    "Trajectory",
    "decay_rates",
    "observables",
    "propagate_master",
    "propagate_schrodinger",
    "propagator",
]

#: Radiative plus black-body lifetimes of the gate levels, μs.
LIFETIMES_US = {"90S": 270.0, "96S": 314.0, "90P": 361.0, "95P": 406.0}


@dataclass(frozen=True)
class DecayChannel:
    """Population loss from basis state ``index`` at ``rate`` (1/μs)."""

    index: int
    rate: float

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("decay rates must be non-negative")
        if self.index < 0:
            raise ValueError("state index must be non-negative")

    @classmethod
    def from_lifetime(cls, index: int, tau: float) -> "DecayChannel":
        return cls(index, 1.0 / tau)


def decay_rates(decays: Sequence[DecayChannel], dim: int) -> np.ndarray:
    """Per-state total loss rates; repeated indices add."""
    g = np.zeros(dim)
    for d in decays:
        if d.index >= dim:
            raise ValueError(f"decay index {d.index} outside dimension {dim}")
        g[d.index] += d.rate
    return g


@dataclass(frozen=True)
class ParametricHamiltonian:
    """H(t) = static + envelope(t) * modulated, both real symmetric.

    ``breakpoints`` are the envelope's discontinuities.
    """

    static: np.ndarray
    modulated: np.ndarray
    envelope: Callable[[float], float]
    breakpoints: tuple[float, ...] = ()

    def __post_init__(self):
        for m in (self.static, self.modulated):
            if m.shape != self.static.shape or not np.allclose(m, m.T, atol=0):
                raise ValueError("static and modulated parts must be symmetric and of equal shape")

    @property
    def dim(self) -> int:
        return self.static.shape[0]

    def __call__(self, t: float) -> np.ndarray:
        return self.static + float(self.envelope(t)) * self.modulated


@dataclass
class QuantumState:
    """State vector or density matrix with optional basis labels."""

    data: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        if self.data.ndim not in (1, 2):
            raise ValueError("state must be a vector or a square matrix")
        if self.data.ndim == 2 and self.data.shape[0] != self.data.shape[1]:
            raise ValueError("density matrix must be square")
        if self.labels is not None and len(self.labels) != self.dim:
            raise ValueError("one label per basis state is required")

    @classmethod
    def basis(cls, dim: int, index: int, labels=None) -> "QuantumState":
        v = np.zeros(dim, dtype=complex)
        v[index] = 1.0
        return cls(v, labels)

    @property
    def is_density(self) -> bool:
        return self.data.ndim == 2

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def density(self) -> np.ndarray:
        if self.is_density:
            return self.data
        return np.outer(self.data, self.data.conj())

    def trace(self) -> float:
        return float(np.real(np.trace(self.density())))

    def validate(self, tol: float = 1e-10) -> None:
        """Check the physical invariants, raising ``ValueError`` on violation."""
        if not self.is_density:
            if np.linalg.norm(self.data) > 1.0 + tol:
                raise ValueError("state norm exceeds 1")
            return
        rho = self.data
        if np.linalg.norm(rho - rho.conj().T) > tol:
            raise ValueError("density matrix is not Hermitian")
        if np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))) < -tol:
            raise ValueError("density matrix has negative eigenvalues")
        if self.trace() > 1.0 + tol:
            raise ValueError("trace exceeds 1")


@dataclass
class Trajectory:
    """Sampled states; ``states`` has shape (n, N) or (n, N, N)."""

    times: np.ndarray
    states: np.ndarray
    labels: tuple[str, ...] | None = None

    @property
    def is_density(self) -> bool:
        return self.states.ndim == 3

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def __len__(self):
        return len(self.times)

    def to_csv(self, path, phase_index: int = 0) -> None:
        obs = observables(self, phase_index)
        n = obs.populations.shape[1]
        names = list(self.labels) if self.labels else [str(k) for k in range(n)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_us", *[f"pop[{x}]" for x in names], f"phase[{names[phase_index]}]_rad",
                        "trace", "purity"])
            rows = np.column_stack([self.times, obs.populations, obs.phase, obs.trace, obs.purity])
            w.writerows(rows.tolist())

    def to_json(self, path) -> None:
        payload = {"times_us": self.times.tolist(), "labels": list(self.labels or []),
                   "kind": "density" if self.is_density else "vector",
                   "re": self.states.real.tolist(), "im": self.states.imag.tolist()}
        with open(path, "w") as fh:
            json.dump(payload, fh)


def _hamiltonian_kind(H, t0: float, dim: int) -> bool:
    h = np.asarray(H(t0))
    if h.shape != (dim, dim):
        raise ValueError(f"Hamiltonian shape {h.shape} does not match state dimension {dim}")
    return np.isrealobj(h) or not np.any(h.imag)


def _breakpoints(H, breakpoints):
    if breakpoints is None:
        return tuple(getattr(H, "breakpoints", ()))
    return tuple(breakpoints)


def propagate_schrodinger(H: Callable, psi0, t_span, *, breakpoints=None, t_eval=None,
                          rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                          labels=None) -> Trajectory:
    """Integrate i dψ/dt = H(t) ψ.

    ``breakpoints`` default to ``H.breakpoints`` when the Hamiltonian has
    them. Without ``t_eval`` only the final state is returned.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-12:
        raise ValueError("initial state must be normalised")
    n = psi0.size
    real_h = _hamiltonian_kind(H, t_span[0], n)

    if isinstance(H, ParametricHamiltonian):
        static, mod, env = H.static, H.modulated, H.envelope

        def rhs(t, y):
            Y = y.reshape(2, n).T
            HY = static @ Y + env(t) * (mod @ Y)
            return np.concatenate([HY[:, 1], -HY[:, 0]])
    elif real_h:
        def rhs(t, y):
            h = np.real(H(t))
            return np.concatenate([h @ y[n:], -(h @ y[:n])])
    else:
        def rhs(t, y):
            d = -1j * (H(t) @ (y[:n] + 1j * y[n:]))
            return np.concatenate([d.real, d.imag])

    t, ys = integrate_segments(rhs, np.concatenate([psi0.real, psi0.imag]), t_span,
                               _breakpoints(H, breakpoints), t_eval, rtol=rtol, atol=atol)
    return Trajectory(t, ys[:, :n] + 1j * ys[:, n:], labels)


def _unitary_rhs(H, n, gamma, real_h, ncols):
    half_g = 0.5 * gamma[:, None]
    size = n * ncols
    if isinstance(H, ParametricHamiltonian):
        static, mod, env = H.static, H.modulated, H.envelope

        def rhs(t, y):
            Y = y.reshape(2 * n, ncols)
            re, im = Y[:n], Y[n:]
            e = env(t)
            h_im = static @ im + e * (mod @ im)
            h_re = static @ re + e * (mod @ re)
            return np.concatenate([(h_im - half_g * re).ravel(), (-h_re - half_g * im).ravel()])
    elif real_h:
        def rhs(t, y):
            h = np.real(H(t))
            re = y[:size].reshape(n, ncols)
            im = y[size:].reshape(n, ncols)
            return np.concatenate([(h @ im - half_g * re).ravel(), (-(h @ re) - half_g * im).ravel()])
    else:
        def rhs(t, y):
            m = (y[:size] + 1j * y[size:]).reshape(n, ncols)
            d = -1j * (H(t) @ m) - half_g * m
            return np.concatenate([d.real.ravel(), d.imag.ravel()])
    return rhs


def propagator(H: Callable, dim: int, t_span, *, decays: Sequence[DecayChannel] = (),
               breakpoints=None, rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> np.ndarray:
    """Evolution operator of H_eff = H - (i/2) diag(γ) over ``t_span``.

    With decay the result is a contraction; ρ(t) = U ρ(0) U† reproduces the
    depopulation master equation exactly.
    """
    gamma = decay_rates(decays, dim)
    real_h = _hamiltonian_kind(H, t_span[0], dim)
    rhs = _unitary_rhs(H, dim, gamma, real_h, dim)
    eye = np.eye(dim)
    y0 = np.concatenate([eye.ravel(), np.zeros(dim * dim)])
    _, ys = integrate_segments(rhs, y0, t_span, _breakpoints(H, breakpoints), None,
                               rtol=rtol, atol=atol)
    y = ys[-1]
    return (y[: dim * dim] + 1j * y[dim * dim:]).reshape(dim, dim)


def propagate_master(H: Callable, rho0, decays: Sequence[DecayChannel], t_span, *,
                     breakpoints=None, t_eval=None, rtol: float = DEFAULT_RTOL,
                     atol: float = DEFAULT_ATOL, labels=None) -> Trajectory:
    """Integrate dρ/dt = -i[H, ρ] - 1/2 Σ_r γ_r {|r⟩⟨r|, ρ}.

    The density matrix is integrated as a flattened real vector by the same
    stepper as state vectors. Output samples are re-symmetrised as
    (ρ + ρ†)/2; the integration itself is left untouched.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    QuantumState(rho0).validate()
    n = rho0.shape[0]
    gamma = decay_rates(decays, n)
    _hamiltonian_kind(H, t_span[0], n)
    size = n * n
    half_g = 0.5 * gamma

    def rhs(t, y):
        rho = (y[:size] + 1j * y[size:]).reshape(n, n)
        h = H(t)
        hr = h @ rho
        # -i(H ρ - ρ H) - 1/2 (Γ ρ + ρ Γ), H Hermitian
        d = -1j * (hr - hr.conj().T) - half_g[:, None] * rho - rho * half_g[None, :]
        return np.concatenate([d.real.ravel(), d.imag.ravel()])

    t, ys = integrate_segments(rhs, np.concatenate([rho0.real.ravel(), rho0.imag.ravel()]), t_span,
                               _breakpoints(H, breakpoints), t_eval, rtol=rtol, atol=atol)
    states = (ys[:, :size] + 1j * ys[:, size:]).reshape(-1, n, n)
    states = 0.5 * (states + states.conj().transpose(0, 2, 1))
    return Trajectory(t, states, labels)


@dataclass
class Observables:
    """Per-sample populations, unwrapped phase, trace and purity."""

    times: np.ndarray
    populations: np.ndarray
    phase: np.ndarray
    trace: np.ndarray
    purity: np.ndarray


def observables(traj: Trajectory, phase_index: int = 0, reference_index: int | None = None) -> Observables:
    """Extract observables from a trajectory.

    For state vectors the phase is arg ψ_k, or arg(ψ_k ψ_ref*) when
    ``reference_index`` is given. For density matrices it is arg ρ_{k,ref},
    which needs a reference index to be informative. Phases are unwrapped
    along the time grid.
    """
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    s = traj.states
    if traj.is_density:
        pops = np.real(np.einsum("tii->ti", s))
        ref = phase_index if reference_index is None else reference_index
        phase = np.angle(s[:, phase_index, ref])
        trace = pops.sum(axis=1)
        purity = np.real(np.einsum("tij,tji->t", s, s))
    else:
        pops = np.abs(s) ** 2
        amp = s[:, phase_index]
        if reference_index is not None:
            amp = amp * s[:, reference_index].conj()
        phase = np.angle(amp)
        trace = pops.sum(axis=1)
        purity = trace**2
    return Observables(traj.times, pops, np.unwrap(phase), trace, purity)
