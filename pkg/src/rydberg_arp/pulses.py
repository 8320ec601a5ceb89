"""Two-level adiabatic rapid passage.

The drive Hamiltonian in the bare basis {|1⟩, |2⟩} is

    H(t) = 1/2 [[0, Ω₀(t)], [Ω₀(t), 2 δ(t)]]

with Ω₀ and δ angular frequencies (rad/μs) and t in μs.

Two engines are provided. :func:`evolve_exact` integrates the Schrödinger
equation with an adaptive Dormand-Prince stepper, restarting at every
discontinuity of the drive. :func:`evolve_adiabatic` evaluates the dressed
state picture, in which each dressed amplitude only picks up the dynamical
phase -1/2 ∫ Ω∓ dt. A full passage maps |1⟩ to -exp(-iS)|2⟩, and two
identical passages return the system to |1⟩ with a π phase. Flipping the sign
of Ω₀ in the second passage cancels it.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_trapezoid

from ._ode import DEFAULT_ATOL, DEFAULT_RTOL, StepSizeUnderflow, integrate_segments, left_limit, sample_grid
from .stark import TWO_PI, DetuningProfile, profile_detuning

__all__ = [
    "AdiabaticityViolated",
    "StepSizeUnderflow",
    "TwoLevelDrive",
    "TwoLevelTrajectory",
    "DressedTrajectory",
    "PassageParams",
    "PassageResult",
    "SHAPES",
    "build_drive",
    "double_passage",
    "evolve_adiabatic",
    "evolve_exact",
    "gaussian_drive",
    "principal_phase",
    "rectangular_drive",
]

SHAPES = ("gaussian_linear_chirp", "rectangular_nonlinear")
_MAX_SAMPLE_STEP = 1e-3  # 1 ns


class AdiabaticityViolated(UserWarning):
    """The adiabaticity parameter exceeded its threshold somewhere on the grid."""


def principal_phase(phi):
    """Map angles into (-π/2, 3π/2] so that both 0 and π sit away from the cut."""
    phi = np.asarray(phi, dtype=float)
    out = np.mod(phi + 0.5 * math.pi, TWO_PI) - 0.5 * math.pi
    out = np.where(out <= -0.5 * math.pi, out + TWO_PI, out)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class TwoLevelDrive:
    """Time-dependent Rabi frequency and detuning on ``t_span``.

    ``rabi`` and ``detuning`` are callables of a scalar time returning
    angular frequencies. ``breakpoints`` lists interior times where either is
    discontinuous; the exact integrator restarts there.
    """

    rabi: Callable[[float], float]
    detuning: Callable[[float], float]
    t_span: tuple[float, float]
    breakpoints: tuple[float, ...] = ()

    def __post_init__(self):
        a, b = (float(x) for x in self.t_span)
        if not b > a:
            raise ValueError("t_span must be increasing")
        object.__setattr__(self, "t_span", (a, b))
        object.__setattr__(self, "breakpoints", tuple(sorted(float(x) for x in self.breakpoints if a < x < b)))

    def segments(self) -> list[tuple[float, float]]:
        pts = [self.t_span[0], *self.breakpoints, self.t_span[1]]
        return list(zip(pts[:-1], pts[1:]))

    def hamiltonian(self, t: float) -> np.ndarray:
        om = self.rabi(t)
        return np.array([[0.0, 0.5 * om], [0.5 * om, self.detuning(t)]])

    def reversed(self) -> "TwoLevelDrive":
        """The drive played backwards in time on the same span."""
        a, b = self.t_span
        rabi, det = self.rabi, self.detuning
        return TwoLevelDrive(lambda t: rabi(a + b - t), lambda t: det(a + b - t),
                             self.t_span, tuple(a + b - x for x in self.breakpoints))

    def check_finite(self, n: int = 2001) -> None:
        grid = np.linspace(*self.t_span, n)
        vals = [(self.rabi(t), self.detuning(t)) for t in grid]
        if not np.all(np.isfinite(vals)):
            raise ValueError("drive is not finite on t_span")


@dataclass
class TwoLevelTrajectory:
    """Bare amplitudes sampled on a time grid."""

    times: np.ndarray
    amplitudes: np.ndarray  # shape (n, 2)

    @property
    def final(self) -> np.ndarray:
        return self.amplitudes[-1]

    @property
    def pop1(self) -> np.ndarray:
        return np.abs(self.amplitudes[:, 0]) ** 2

    @property
    def phase1(self) -> np.ndarray:
        """arg c₁ unwrapped along the grid."""
        return np.unwrap(np.angle(self.amplitudes[:, 0]))

    @property
    def norm_defect(self) -> float:
        return float(np.max(np.abs(np.sum(np.abs(self.amplitudes) ** 2, axis=1) - 1.0)))

    def to_csv(self, path) -> None:
        c = self.amplitudes
        cols = np.column_stack([self.times, c[:, 0].real, c[:, 0].imag, c[:, 1].real,
                                c[:, 1].imag, self.pop1, self.phase1])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_us", "re_c1", "im_c1", "re_c2", "im_c2", "pop1", "phase1_rad"])
            w.writerows(cols.tolist())


def evolve_exact(drive: TwoLevelDrive, initial=(1.0, 0.0), *, rtol: float = DEFAULT_RTOL,
                 atol: float = DEFAULT_ATOL, dt: float = _MAX_SAMPLE_STEP,
                 norm_tol: float | None = None) -> TwoLevelTrajectory:
    """Integrate the two-level Schrödinger equation over ``drive.t_span``.

    The state is split into real and imaginary parts and integrated with
    DOP853, restarting at each breakpoint. Output is sampled every ``dt``
    (at most 1 ns) plus the breakpoints.

    Raises
    ------
    StepSizeUnderflow
        If the integrator fails on any segment, or the norm drifts by more
        than ``norm_tol`` when that is given.
    """
    c0 = np.asarray(initial, dtype=complex)
    if c0.shape != (2,):
        raise ValueError("initial state must have two components")
    if abs(np.vdot(c0, c0).real - 1.0) > 1e-12:
        raise ValueError("initial state must be normalised")
    dt = min(dt, _MAX_SAMPLE_STEP)

    def rhs(t, y):
        om = 0.5 * drive.rabi(t)
        de = drive.detuning(t)
        r1, r2, i1, i2 = y
        # d c/dt = -i H c
        return [om * i2, om * i1 + de * i2, -om * r2, -om * r1 - de * r2]

    grid = np.concatenate([sample_grid(a, b, dt) for a, b in drive.segments()])
    t, s = integrate_segments(rhs, np.concatenate([c0.real, c0.imag]), drive.t_span,
                              drive.breakpoints, grid, rtol=rtol, atol=atol)
    traj = TwoLevelTrajectory(t, s[:, :2] + 1j * s[:, 2:])
    if norm_tol is not None and traj.norm_defect > norm_tol:
        raise StepSizeUnderflow(f"norm drifted by {traj.norm_defect:.2e}")
    return traj


@dataclass
class DressedTrajectory:
    """Adiabatic (dressed-state) solution on a time grid.

    ``theta`` is the mixing angle, ``omega_minus``/``omega_plus`` the
    dressed frequencies δ ∓ Ω, ``dressed`` the dressed amplitudes, ``bare``
    the amplitudes transformed back to {|1⟩, |2⟩} and ``phase`` the
    accumulated S(t) = 1/2 ∫ Ω₋ dt since the start of the span.
    ``adiabaticity`` holds max(|Ω̇₀|, |δ̇|)/Ω² per sample.
    """

    times: np.ndarray
    theta: np.ndarray
    omega_minus: np.ndarray
    omega_plus: np.ndarray
    dressed: np.ndarray
    bare: np.ndarray
    phase: np.ndarray
    adiabaticity: np.ndarray
    threshold: float
    violated: bool = field(default=False)

    @property
    def omega(self) -> np.ndarray:
        return 0.5 * (self.omega_plus - self.omega_minus)

    @property
    def pop1(self) -> np.ndarray:
        return np.abs(self.bare[:, 0]) ** 2

    @property
    def phase1(self) -> np.ndarray:
        return np.unwrap(np.angle(self.bare[:, 0]))


def _mixing(om0, det):
    om = np.hypot(om0, det)
    safe = np.where(om > 0, om, 1.0)
    ratio = np.where(om > 0, det / safe, 1.0)
    cos_t = np.sqrt(np.clip(0.5 * (1.0 + ratio), 0.0, 1.0))
    sin_t = np.sign(np.where(om0 == 0, 1.0, om0)) * np.sqrt(np.clip(0.5 * (1.0 - ratio), 0.0, 1.0))
    return om, cos_t, sin_t


def evolve_adiabatic(drive: TwoLevelDrive, initial=(1.0, 0.0), *, dt: float = 2e-4,
                     threshold: float = 0.1) -> DressedTrajectory:
    """Adiabatic solution neglecting θ̇ couplings between dressed states.

    At the start of each drive segment the bare state is projected onto the
    instantaneous dressed basis; within the segment each dressed amplitude
    evolves as exp(-(i/2) ∫ Ω∓ dt). A warning of category
    :class:`AdiabaticityViolated` is issued, and ``violated`` set, when the
    adiabaticity parameter exceeds ``threshold``.
    """
    c = np.asarray(initial, dtype=complex)
    times, thetas, om_m, om_p, dressed, bare, phase, adia = ([] for _ in range(8))
    s_offset = 0.0
    for k, (a, b) in enumerate(drive.segments()):
        t = sample_grid(a, b, dt)
        te = np.minimum(t, left_limit(b))
        om0 = np.array([drive.rabi(x) for x in te])
        det = np.array([drive.detuning(x) for x in te])
        om, cos_t, sin_t = _mixing(om0, det)
        wm, wp = det - om, det + om
        # project onto dressed states at the segment start
        ct0 = np.array([cos_t[0] * c[0] - sin_t[0] * c[1], sin_t[0] * c[0] + cos_t[0] * c[1]])
        int_m = cumulative_trapezoid(wm, t, initial=0.0)
        int_p = cumulative_trapezoid(wp, t, initial=0.0)
        ct = np.column_stack([ct0[0] * np.exp(-0.5j * int_m), ct0[1] * np.exp(-0.5j * int_p)])
        cb = np.column_stack([cos_t * ct[:, 0] + sin_t * ct[:, 1], -sin_t * ct[:, 0] + cos_t * ct[:, 1]])
        with np.errstate(divide="ignore", invalid="ignore"):
            rate = np.maximum(np.abs(np.gradient(om0, t)), np.abs(np.gradient(det, t))) / om**2
        rate = np.where(np.isfinite(rate), rate, np.inf)
        start = 0 if k == 0 else 1
        for store, arr in ((times, t), (thetas, np.arctan2(sin_t, cos_t)), (om_m, wm), (om_p, wp),
                           (dressed, ct), (bare, cb), (phase, s_offset + 0.5 * int_m), (adia, rate)):
            store.append(arr[start:])
        s_offset += 0.5 * int_m[-1]
        c = cb[-1]
    rate = np.concatenate(adia)
    violated = bool(np.max(rate) > threshold)
    if violated:
        warnings.warn(f"adiabaticity parameter reaches {np.max(rate):.3g} > {threshold}",
                      AdiabaticityViolated, stacklevel=2)
    return DressedTrajectory(np.concatenate(times), np.concatenate(thetas), np.concatenate(om_m),
                             np.concatenate(om_p), np.concatenate(dressed), np.concatenate(bare),
                             np.concatenate(phase), rate, threshold, violated)


@dataclass(frozen=True)
class PassageParams:
    """Parameters of a double passage, angular units (rad/μs, μs).

    ``width`` is the Gaussian standard deviation w in
    Ω₀ exp(-(t - t_k)²/(2 w²)); ``s2`` the quintic chirp of the rectangular
    scheme. ``t_span`` defaults to the centres ± half their spacing.
    """

    omega0: float
    s1: float
    t1: float
    t2: float
    width: float | None = None
    s2: float = 0.0
    t_span: tuple[float, float] | None = None

    @classmethod
    def from_mhz(cls, omega0_mhz: float, s1_mhz: float, t1: float, t2: float, width=None,
                 s2_mhz: float = 0.0, t_span=None) -> "PassageParams":
        return cls(TWO_PI * omega0_mhz, TWO_PI * s1_mhz, t1, t2, width, TWO_PI * s2_mhz,
                   None if t_span is None else tuple(t_span))

    def validate(self, shape: str) -> None:
        if shape not in SHAPES:
            raise ValueError(f"unknown shape {shape!r}; expected one of {SHAPES}")
        if not self.t2 > self.t1:
            raise ValueError("t2 must exceed t1")
        if self.omega0 == 0:
            raise ValueError("omega0 must be non-zero")
        if shape == "gaussian_linear_chirp" and not (self.width and self.width > 0):
            raise ValueError("gaussian shape needs a positive width")

    def profile(self) -> DetuningProfile:
        half = 0.5 * (self.t2 - self.t1)
        return DetuningProfile(self.s1, self.s2, (self.t1, self.t2), (half, half))

    def span(self) -> tuple[float, float]:
        if self.t_span is not None:
            return tuple(self.t_span)
        half = 0.5 * (self.t2 - self.t1)
        return self.t1 - half, self.t2 + half


def _window_sign(t, boundary, sign_flip):
    return -1.0 if (sign_flip and t >= boundary) else 1.0


def gaussian_drive(params: PassageParams, sign_flip: bool = False) -> TwoLevelDrive:
    """Two Gaussian pulses, each with its own linear chirp through zero at its centre."""
    params.validate("gaussian_linear_chirp")
    profile = params.profile()
    boundary = profile.reset_times[0]
    centres = params.t1, params.t2
    w2 = 2.0 * params.width**2

    def rabi(t):
        tc = centres[0] if t < boundary else centres[1]
        return params.omega0 * _window_sign(t, boundary, sign_flip) * math.exp(-((t - tc) ** 2) / w2)

    def detuning(t):
        return float(profile_detuning(profile, t))

    return TwoLevelDrive(rabi, detuning, params.span(), (boundary,))


def rectangular_drive(params: PassageParams, sign_flip: bool = False) -> TwoLevelDrive:
    """Constant Rabi frequency with a linear-plus-quintic detuning sweep per passage."""
    params.validate("rectangular_nonlinear")
    profile = params.profile()
    boundary = profile.reset_times[0]

    def rabi(t):
        return params.omega0 * _window_sign(t, boundary, sign_flip)

    def detuning(t):
        return float(profile_detuning(profile, t))

    return TwoLevelDrive(rabi, detuning, params.span(), (boundary,))


def build_drive(shape: str, params: PassageParams, sign_flip: bool = False) -> TwoLevelDrive:
    if shape == "gaussian_linear_chirp":
        return gaussian_drive(params, sign_flip)
    if shape == "rectangular_nonlinear":
        return rectangular_drive(params, sign_flip)
    raise ValueError(f"unknown shape {shape!r}; expected one of {SHAPES}")


@dataclass
class PassageResult:
    """Outcome of a double passage started in |1⟩."""

    shape: str
    sign_flip: bool
    amplitudes: np.ndarray
    population_error: float
    phase: float
    trajectory: TwoLevelTrajectory

    def summary(self) -> dict:
        return {"shape": self.shape, "sign_flip": self.sign_flip,
                "population_error": self.population_error, "phase_rad": self.phase,
                "norm_defect": self.trajectory.norm_defect}


def double_passage(shape: str, params: PassageParams, sign_flip: bool = False,
                   **solver) -> PassageResult:
    """Run two passages from |1⟩ and report 1 - |c₁|² and arg c₁ at the end.

    The phase is given in (-π/2, 3π/2] so that both expected outcomes, 0 and
    π, are far from the branch cut.
    """
    drive = build_drive(shape, params, sign_flip)
    traj = evolve_exact(drive, **solver)
    c = traj.final
    return PassageResult(shape, sign_flip, c, float(1.0 - abs(c[0]) ** 2),
                         principal_phase(np.angle(c[0])), traj)
