"""Quadratic Stark tuning of the Förster pair detuning.

Units used throughout the package:

* time in μs, distance in μm, electric field in V/cm;
* frequencies are angular, in rad/μs (so ``2*pi*1`` is 1 MHz);
* tabulated MHz values (polarizabilities in MHz/(V/cm)², Förster defects in
  MHz) are ordinary frequencies and are multiplied by 2π when they enter a
  Hamiltonian.

The detuning profile of a field-tuned crossing is a sum of a linear and a
quintic term around each crossing time, held constant outside the crossing
windows. A new window resets the detuning to that window's start value, so
consecutive passes all sweep in the same direction.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .angular import RydbergLevel, twice

__all__ = [
    "MissingPolarizability",
    "NoResonance",
    "OutOfRange",
    "Polarizability",
    "PolarizabilityTable",
    "DetuningProfile",
    "FieldWaveform",
    "stark_shift",
    "pair_detuning",
    "resonance_field",
    "profile_detuning",
    "field_from_profile",
    "detuning_series",
]

TWO_PI = 2.0 * math.pi


class MissingPolarizability(KeyError):
    """No polarizability is known for a (level, |m_j|) pair."""


class NoResonance(ValueError):
    """The pair detuning has no root at non-negative field."""


class OutOfRange(ValueError):
    """A requested detuning cannot be produced by a real field."""


@dataclass(frozen=True)
class Polarizability:
    """Scalar polarizability of one (level, |m_j|) sublevel.

    ``alpha`` is in MHz/(V/cm)² (ordinary frequency).
    """

    level: RydbergLevel
    two_abs_mj: int
    alpha: float

    def __post_init__(self):
        if not math.isfinite(self.alpha):
            raise ValueError("polarizability must be finite")
        if self.two_abs_mj < 0 or self.two_abs_mj > self.level.two_j:
            raise ValueError("|m_j| out of range for level")


class PolarizabilityTable:
    """Lookup of polarizabilities keyed by level and |m_j|."""

    def __init__(self, entries: Sequence[Polarizability] = ()):
        self._entries: dict[tuple[RydbergLevel, int], Polarizability] = {}
        for p in entries:
            key = (p.level, p.two_abs_mj)
            if key in self._entries:
                raise ValueError(f"duplicate polarizability for {p.level} |mj|={p.two_abs_mj}/2")
            self._entries[key] = p

    def __len__(self):
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries.values())

    def get(self, level: RydbergLevel, mj) -> Polarizability:
        key = (level, abs(twice(mj)))
        try:
            return self._entries[key]
        except KeyError:
            raise MissingPolarizability(f"no polarizability for {level} |mj|={key[1]}/2") from None

    def alpha(self, level: RydbergLevel, mj) -> float:
        return self.get(level, mj).alpha


def stark_shift(p: Polarizability | float, E) -> float | np.ndarray:
    """Quadratic Stark shift -α E²/2 as an angular frequency (rad/μs).

    ``p`` may be a :class:`Polarizability` or a bare α in MHz/(V/cm)².
    """
    alpha = p.alpha if isinstance(p, Polarizability) else float(p)
    E = np.asarray(E, dtype=float)
    if np.any(E < 0):
        raise ValueError("field magnitude must be non-negative")
    out = -0.5 * TWO_PI * alpha * E**2
    return float(out) if out.ndim == 0 else out


def _pair_alpha(ch) -> float:
    alpha = getattr(ch, "pair_polarizability", None)
    if alpha is None:
        raise MissingPolarizability(f"channel {getattr(ch, 'label', ch)!r} has no pair polarizability")
    return alpha


def pair_detuning(ch, E):
    """Energy of the final pair minus the initial pair at field ``E`` (rad/μs).

    ``ch`` needs ``delta0`` (rad/μs) and ``pair_polarizability``, the
    difference α_α + α_β - α_a - α_b in MHz/(V/cm)².
    """
    return ch.delta0 + stark_shift(_pair_alpha(ch), E)


def resonance_field(ch, rtol: float = 1e-9) -> float:
    """Field (V/cm) at which the channel becomes exactly resonant."""
    alpha = _pair_alpha(ch)
    if ch.delta0 == 0:
        return 0.0
    # -α E²/2 must cancel Δ0, so sign(α) == sign(Δ0)
    if alpha == 0 or math.copysign(1.0, alpha) != math.copysign(1.0, ch.delta0):
        raise NoResonance(f"channel {getattr(ch, 'label', ch)!r} never crosses resonance")
    hi = 1.0
    while pair_detuning(ch, hi) * ch.delta0 > 0:
        hi *= 2.0
        if hi > 1e6:
            raise NoResonance("bracketing failed")
    return brentq(lambda e: pair_detuning(ch, e), 0.0, hi, rtol=rtol, xtol=1e-15)


@dataclass(frozen=True)
class DetuningProfile:
    """Piecewise detuning with one nonlinear sweep per crossing.

    Inside window k (``|t - t_k| <= half_width_k``) the detuning is
    ``s1*(t - t_k) + s2*(t - t_k)**5``. Outside all windows it is held at the
    edge value of the most recent window (the first window's start value
    before it). When window k+1 opens the detuning resets to its start
    value. ``inter_segment_level``, when set, caps |δ| while held.

    Rates are angular: ``s1`` in rad/μs², ``s2`` in rad/μs⁶.
    """

    s1: float
    s2: float
    crossing_times: tuple[float, ...]
    half_widths: tuple[float, ...] = ()
    inter_segment_level: float | None = None

    def __post_init__(self):
        times = tuple(float(t) for t in self.crossing_times)
        object.__setattr__(self, "crossing_times", times)
        widths = tuple(float(w) for w in self.half_widths) or (0.45,) * len(times)
        if len(widths) == 1 and len(times) > 1:
            widths = widths * len(times)
        object.__setattr__(self, "half_widths", widths)
        if len(widths) != len(times):
            raise ValueError("one half-width per crossing is required")
        if any(w <= 0 for w in widths):
            raise ValueError("half-widths must be positive")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("crossing times must be strictly increasing")
        object.__setattr__(self, "_starts", tuple(t - w for t, w in zip(times, widths)))

    @classmethod
    def from_mhz(cls, s1_mhz: float, s2_mhz: float, crossing_times, half_width=0.45, **kw):
        """Build from rates quoted as s/2π in MHz/μs and MHz/μs⁵."""
        return cls(TWO_PI * s1_mhz, TWO_PI * s2_mhz, tuple(crossing_times),
                   (half_width,) if np.isscalar(half_width) else tuple(half_width), **kw)

    @property
    def windows(self) -> list[tuple[float, float]]:
        return [(t - w, t + w) for t, w in zip(self.crossing_times, self.half_widths)]

    @property
    def t_span(self) -> tuple[float, float]:
        return self.windows[0][0], self.windows[-1][1]

    @property
    def duration(self) -> float:
        a, b = self.t_span
        return b - a

    @property
    def reset_times(self) -> list[float]:
        """Instants where a new window opens and the detuning may jump."""
        return [w[0] for w in self.windows[1:]]

    def breakpoints(self) -> list[float]:
        """Interior instants where δ or its derivative is discontinuous."""
        a, b = self.t_span
        pts = set()
        for lo, hi in self.windows:
            pts.update((lo, hi))
        return sorted(p for p in pts if a < p < b)

    def segment_index(self, t: float) -> int:
        k = 0
        for i, (lo, _) in enumerate(self.windows):
            if t >= lo:
                k = i
        return k

    def shifted(self, k: int, dt: float) -> "DetuningProfile":
        """Copy with crossing ``k`` moved by ``dt``."""
        times = list(self.crossing_times)
        times[k] += dt
        return DetuningProfile(self.s1, self.s2, tuple(times), self.half_widths, self.inter_segment_level)

    def sweep(self, tau):
        return self.s1 * tau + self.s2 * tau**5

    def __call__(self, t):
        return profile_detuning(self, t)


def _scalar_detuning(p: DetuningProfile, t: float) -> float:
    k = max(bisect_right(p._starts, t) - 1, 0)
    w = p.half_widths[k]
    tau = t - p.crossing_times[k]
    held = tau > w or tau < -w
    tau = min(max(tau, -w), w)
    delta = p.s1 * tau + p.s2 * tau**5
    if held and p.inter_segment_level is not None:
        cap = abs(p.inter_segment_level)
        delta = min(max(delta, -cap), cap)
    return delta


def profile_detuning(p: DetuningProfile, t):
    """Detuning δ(t) in rad/μs; vectorised over ``t``."""
    if isinstance(t, (float, int)):
        return _scalar_detuning(p, float(t))
    t_arr = np.asarray(t, dtype=float)
    scalar = t_arr.ndim == 0
    t_arr = np.atleast_1d(t_arr)
    starts = np.array([w[0] for w in p.windows])
    k = np.clip(np.searchsorted(starts, t_arr, side="right") - 1, 0, None)
    centers = np.asarray(p.crossing_times)[k]
    widths = np.asarray(p.half_widths)[k]
    tau = t_arr - centers
    held = np.abs(tau) > widths
    tau = np.clip(tau, -widths, widths)
    delta = p.s1 * tau + p.s2 * tau**5
    if p.inter_segment_level is not None:
        cap = abs(p.inter_segment_level)
        delta = np.where(held, np.clip(delta, -cap, cap), delta)
    return float(delta[0]) if scalar else delta


@dataclass(frozen=True)
class FieldWaveform:
    """Electric field E(t) ≥ 0 realising a detuning profile for one channel.

    E(t) = sqrt(2 (Δ0 - δ(t)) / α_pair) with α_pair in angular units.
    """

    profile: DetuningProfile
    delta0: float
    pair_polarizability: float
    label: str = ""

    @property
    def t_span(self):
        return self.profile.t_span

    def breakpoints(self):
        return self.profile.breakpoints()

    def field_squared(self, t):
        return 2.0 * (self.delta0 - profile_detuning(self.profile, t)) / (TWO_PI * self.pair_polarizability)

    def envelope(self, t: float) -> float:
        """Scalar E²(t), the cheap path used inside integrators."""
        return 2.0 * (self.delta0 - _scalar_detuning(self.profile, float(t))) / (TWO_PI * self.pair_polarizability)

    def __call__(self, t):
        return np.sqrt(np.maximum(self.field_squared(t), 0.0))

    def samples(self, dt: float = 1e-3) -> tuple[np.ndarray, np.ndarray]:
        a, b = self.t_span
        n = int(round((b - a) / dt)) + 1
        times = np.linspace(a, b, n)
        return times, self(times)


def field_from_profile(p: DetuningProfile, ch, check_points: int = 4001) -> FieldWaveform:
    """Invert the quadratic Stark law so that ``ch`` follows ``p``.

    Raises :class:`OutOfRange` when some δ(t) would need E² < 0.
    """
    alpha = _pair_alpha(ch)
    if alpha == 0:
        raise OutOfRange("channel detuning does not depend on the field")
    wf = FieldWaveform(p, ch.delta0, alpha, getattr(ch, "label", ""))
    times = [np.linspace(lo, hi, check_points) for lo, hi in p.windows]
    e2 = wf.field_squared(np.concatenate(times))
    if np.min(e2) < -1e-15:
        raise OutOfRange("profile exceeds the field-free detuning; E² would be negative")
    return wf


def detuning_series(channels, waveform: FieldWaveform | Callable, times) -> np.ndarray:
    """Channel detunings Δ_k(E(t)) sampled at ``times``; shape (len(times), n_channels)."""
    E = np.asarray(waveform(np.asarray(times, dtype=float)))
    return np.stack([pair_detuning(ch, E) for ch in channels], axis=-1)
