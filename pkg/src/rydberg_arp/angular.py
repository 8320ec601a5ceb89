"""Exact angular-momentum coupling coefficients.

Clebsch-Gordan coefficients and Wigner 6j symbols are evaluated from the Racah
closed-form sums in exact rational arithmetic; only the final square root is
taken in floating point. All angular momenta are handled internally as doubled
integers (``two_j = 2*j``) so half-integer selection rules are exact.

On top of these primitives the module provides the two quantities needed for
the Förster couplings of an S+S -> P+P pair: the angular factor of a channel
and the fine-structure reduced dipole matrix element.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from numbers import Real

__all__ = [
    "AngularMomentum",
    "DipoleForbidden",
    "MAX_TWO_J",
    "RydbergLevel",
    "angular_factor",
    "c3_coefficient",
    "clebsch_gordan",
    "reduced_matrix_element",
    "twice",
    "wigner_6j",
]

#: Largest doubled angular momentum accepted (j <= 10).
MAX_TWO_J = 20

_L_LETTERS = "SPDFGH"


class DipoleForbidden(ValueError):
    """Raised when a transition violates the |Δl| = 1 dipole selection rule."""


def twice(x) -> int:
    """Return ``2*x`` as an int, checking that ``x`` is an integer or half-integer."""
    if isinstance(x, AngularMomentum):
        return x.two_j
    if isinstance(x, (int, Fraction)):
        d = 2 * Fraction(x)
    elif isinstance(x, Real):
        d = Fraction(2 * float(x)).limit_denominator(1)
        if abs(float(d) - 2 * float(x)) > 1e-9:
            raise ValueError(f"{x!r} is not an integer or half-integer")
    else:
        raise TypeError(f"cannot interpret {x!r} as an angular momentum")
    if d.denominator != 1:
        raise ValueError(f"{x!r} is not an integer or half-integer")
    return int(d)


@dataclass(frozen=True)
class AngularMomentum:
    """Angular momentum ``j`` with projection ``m``, both stored doubled."""

    two_j: int
    two_m: int = 0

    def __post_init__(self):
        if self.two_j < 0:
            raise ValueError("two_j must be non-negative")
        if abs(self.two_m) > self.two_j:
            raise ValueError("|m| exceeds j")
        if (self.two_j - self.two_m) % 2:
            raise ValueError("j and m must have equal parity")

    @classmethod
    def of(cls, j, m=None) -> "AngularMomentum":
        tj = twice(j)
        return cls(tj, tj if m is None else twice(m))

    @property
    def j(self) -> float:
        return self.two_j / 2

    @property
    def m(self) -> float:
        return self.two_m / 2


@dataclass(frozen=True)
class RydbergLevel:
    """Fine-structure Rydberg level ``n l_j``."""

    n: int
    l: int
    two_j: int

    def __post_init__(self):
        if self.two_j not in (2 * self.l - 1, 2 * self.l + 1) or self.two_j < 1:
            raise ValueError(f"j={self.two_j}/2 incompatible with l={self.l}")
        if self.n <= self.l:
            raise ValueError("n must exceed l")

    @property
    def j(self) -> float:
        return self.two_j / 2

    @classmethod
    def parse(cls, label: str) -> "RydbergLevel":
        """Parse labels such as ``"90S1/2"`` or ``"95P3/2"``."""
        match = re.fullmatch(r"\s*(\d+)\s*([SPDFGH])\s*_?\{?(\d+)/2\}?\s*", label)
        if match is None:
            raise ValueError(f"cannot parse level label {label!r}")
        n, letter, tj = match.groups()
        return cls(int(n), _L_LETTERS.index(letter), int(tj))

    @property
    def label(self) -> str:
        return f"{self.n}{_L_LETTERS[self.l]}{self.two_j}/2"

    def __str__(self):
        return self.label


@lru_cache(maxsize=None)
def _fact(n: int) -> int:
    if n < 0:
        raise ValueError("negative factorial argument")
    return math.factorial(n)


def _check_bound(*two_js: int) -> None:
    if max(two_js) > MAX_TWO_J:
        raise ValueError(f"angular momenta above j={MAX_TWO_J // 2} are not supported")


def _triangle(ta: int, tb: int, tc: int) -> bool:
    return abs(ta - tb) <= tc <= ta + tb and (ta + tb + tc) % 2 == 0


def _signed_sqrt(square: Fraction, sign: int) -> float:
    if square == 0:
        return 0.0
    return sign * math.sqrt(square.numerator / square.denominator)


@lru_cache(maxsize=65536)
def _cg2(tj1: int, tm1: int, tj2: int, tm2: int, tJ: int, tM: int) -> float:
    if tM != tm1 + tm2:
        return 0.0
    if not _triangle(tj1, tj2, tJ):
        return 0.0
    for tj, tm in ((tj1, tm1), (tj2, tm2), (tJ, tM)):
        if abs(tm) > tj or (tj - tm) % 2:
            return 0.0
    # every combination below is even by the parity checks above
    a = (tJ + tj1 - tj2) // 2
    b = (tJ - tj1 + tj2) // 2
    c = (tj1 + tj2 - tJ) // 2
    pre = Fraction(
        (tJ + 1) * _fact(a) * _fact(b) * _fact(c)
        * _fact((tJ + tM) // 2) * _fact((tJ - tM) // 2)
        * _fact((tj1 - tm1) // 2) * _fact((tj1 + tm1) // 2)
        * _fact((tj2 - tm2) // 2) * _fact((tj2 + tm2) // 2),
        _fact((tj1 + tj2 + tJ) // 2 + 1),
    )
    total = Fraction(0)
    k_min = max(0, (tj2 - tJ - tm1) // 2, (tj1 - tJ + tm2) // 2)
    k_max = min(c, (tj1 - tm1) // 2, (tj2 + tm2) // 2)
    for k in range(k_min, k_max + 1):
        den = (
            _fact(k) * _fact(c - k) * _fact((tj1 - tm1) // 2 - k)
            * _fact((tj2 + tm2) // 2 - k)
            * _fact((tJ - tj2 + tm1) // 2 + k)
            * _fact((tJ - tj1 - tm2) // 2 + k)
        )
        total += Fraction((-1) ** k, den)
    if total == 0:
        return 0.0
    return _signed_sqrt(pre * total * total, 1 if total > 0 else -1)


def clebsch_gordan(j1, m1, j2, m2, J, M) -> float:
    """Clebsch-Gordan coefficient ⟨j1 m1; j2 m2 | J M⟩ (Condon-Shortley phase).

    Arguments are integers or half-integers (``int``, ``float`` or
    ``Fraction``). Combinations violating the triangle rule, projection
    bounds or ``M = m1 + m2`` give 0.
    """
    args = [twice(x) for x in (j1, m1, j2, m2, J, M)]
    _check_bound(args[0], args[2], args[4])
    return _cg2(*args)


def _delta2(ta: int, tb: int, tc: int) -> Fraction:
    return Fraction(
        _fact((ta + tb - tc) // 2) * _fact((ta - tb + tc) // 2) * _fact((tb + tc - ta) // 2),
        _fact((ta + tb + tc) // 2 + 1),
    )


@lru_cache(maxsize=65536)
def _sixj2(t1: int, t2: int, t3: int, t4: int, t5: int, t6: int) -> float:
    triads = ((t1, t2, t3), (t1, t5, t6), (t4, t2, t6), (t4, t5, t3))
    if not all(_triangle(*tr) for tr in triads):
        return 0.0
    sums = [sum(tr) // 2 for tr in triads]
    pairs = [(t1 + t2 + t4 + t5) // 2, (t1 + t3 + t4 + t6) // 2, (t2 + t3 + t5 + t6) // 2]
    pre = Fraction(1)
    for tr in triads:
        pre *= _delta2(*tr)
    total = Fraction(0)
    for t in range(max(sums), min(pairs) + 1):
        den = _fact(pairs[0] - t) * _fact(pairs[1] - t) * _fact(pairs[2] - t)
        for s in sums:
            den *= _fact(t - s)
        total += Fraction((-1) ** t * _fact(t + 1), den)
    if total == 0:
        return 0.0
    return _signed_sqrt(pre * total * total, 1 if total > 0 else -1)


def wigner_6j(j1, j2, j3, j4, j5, j6) -> float:
    """Wigner 6j symbol {j1 j2 j3; j4 j5 j6} from the Racah formula.

    Returns 0 when any of the four triads (j1 j2 j3), (j1 j5 j6),
    (j4 j2 j6), (j4 j5 j3) violates the triangle rule.
    """
    args = [twice(x) for x in (j1, j2, j3, j4, j5, j6)]
    _check_bound(*args)
    return _sixj2(*args)


def _check_dipole(lo: RydbergLevel, hi: RydbergLevel) -> None:
    if abs(lo.l - hi.l) != 1:
        raise DipoleForbidden(f"{lo} -> {hi} is not dipole allowed")


def angular_factor(a: RydbergLevel, b: RydbergLevel, alpha: RydbergLevel, beta: RydbergLevel,
                   ma, mb, malpha, mbeta) -> float:
    """Angular factor of the pair channel |a ma, b mb⟩ -> |alpha malpha, beta mbeta⟩.

    Q = -sqrt(6) Σ_q C(1 q; 1 -q | 2 0) C(ja ma; 1 q | jα mα) C(jb mb; 1 -q | jβ mβ),
    for an interatomic axis along the quantization axis. Zero unless
    ``ma + mb == malpha + mbeta``.
    """
    _check_dipole(a, alpha)
    _check_dipole(b, beta)
    tma, tmb, tmal, tmbe = (twice(x) for x in (ma, mb, malpha, mbeta))
    if tma + tmb != tmal + tmbe:
        return 0.0
    total = 0.0
    for tq in (-2, 0, 2):
        total += (
            _cg2(2, tq, 2, -tq, 4, 0)
            * _cg2(a.two_j, tma, 2, tq, alpha.two_j, tmal)
            * _cg2(b.two_j, tmb, 2, -tq, beta.two_j, tmbe)
        )
    return -math.sqrt(6.0) * total


def reduced_matrix_element(frm: RydbergLevel, to: RydbergLevel, radial: float) -> float:
    """Fine-structure reduced dipole matrix element ⟨to||r||frm⟩.

    ``radial`` is the radial integral in whatever length unit the caller
    uses (atomic units in practice); the result carries the same unit.
    """
    _check_dipole(frm, to)
    # (l_to + l_frm)/2 + j_frm is an integer because |Δl| = 1 and j is half-odd
    phase = -1 if ((frm.l + to.l + frm.two_j) // 2) % 2 else 1
    sixj = _sixj2(2 * frm.l, 1, frm.two_j, to.two_j, 2, 2 * to.l)
    return (
        phase
        * math.sqrt(max(frm.l, to.l))
        * math.sqrt(to.two_j + 1)
        * math.sqrt(frm.two_j + 1)
        * sixj
        * radial
    )


def c3_coefficient(a: RydbergLevel, b: RydbergLevel, alpha: RydbergLevel, beta: RydbergLevel,
                   radial_a: float, radial_b: float) -> float:
    """Channel C3 coefficient in units of e²/(4πε0) times the radial length unit squared."""
    ra = reduced_matrix_element(a, alpha, radial_a)
    rb = reduced_matrix_element(b, beta, radial_b)
    return ra * rb / math.sqrt((alpha.two_j + 1) * (beta.two_j + 1))
