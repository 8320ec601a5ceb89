"""Multi-channel Förster Hamiltonian of the |90S1/2, 96S1/2⟩ pair.

The collective basis is a star: index 0 is the initial pair state
|90S1/2 m=1/2; 96S1/2 m=1/2⟩ and indices 1..8 are the P+P sublevel channels
it couples to. Diagonal entries are the Stark-tuned pair detunings relative
to the initial pair, off-diagonals the dipole-dipole couplings C3·Q/R³.

Coupling units
--------------
The tabulated C3 coefficients are read as angular coefficients, so
``coupling = C3 * Q / R**3`` is already in rad/μs. With this reading
the channel-1 coupling at R = 25 μm is 2π × 1.05 MHz, which is exactly half
the 2.1 MHz Rabi frequency of the equivalent rectangular two-level passage.
``c3_unit="ordinary"`` multiplies by 2π instead.
"""

from __future__ import annotations

import ast
import hashlib
import json
import math
import operator
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .angular import RydbergLevel, angular_factor
from .stark import (
    TWO_PI,
    MissingPolarizability,
    Polarizability,
    PolarizabilityTable,
    pair_detuning,
)

__all__ = [
    "CatalogMismatch",
    "ChannelSpec",
    "ChannelTables",
    "CollectiveBasis",
    "PairHamiltonian",
    "DEFAULT_COUPLING_FLOOR",
    "build_catalog",
    "catalog_path",
    "catalog_sha256",
    "coupling",
    "hamiltonian_at",
    "load_tables",
]

#: Channels with |C3·Q| below this (MHz μm³) are dropped from the catalog.
DEFAULT_COUPLING_FLOOR = 100.0


class CatalogMismatch(ValueError):
    """Stored angular factor disagrees with its recomputation."""


def catalog_path() -> Path:
    return Path(resources.files("rydberg_arp") / "data" / "cs90s96s_channels.json")


def _schema_path() -> Path:
    return Path(resources.files("rydberg_arp") / "data" / "channels.schema.json")


def catalog_sha256(path=None) -> str:
    return hashlib.sha256(Path(path or catalog_path()).read_bytes()).hexdigest()


_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
        ast.Div: operator.truediv, ast.USub: operator.neg, ast.UAdd: operator.pos}


def _eval_expr(text: str) -> float:
    """Evaluate a small arithmetic expression such as ``-2*sqrt(2)/3``."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id == "sqrt" and len(node.args) == 1):
            return math.sqrt(ev(node.args[0]))
        raise ValueError(f"unsupported expression {text!r}")

    return ev(ast.parse(text, mode="eval"))


def _half(text: str) -> int:
    if "/" in text:
        num, den = text.split("/")
        if int(den) != 2:
            raise ValueError(text)
        return int(num)
    return 2 * int(text)


@dataclass(frozen=True)
class ChannelSpec:
    """One Förster channel |a ma, b mb⟩ -> |α mα, β mβ⟩.

    Projections are stored doubled. ``delta0`` is the zero-field defect in
    rad/μs, ``c3`` the tabulated coefficient (MHz μm³), ``q`` the angular
    factor and ``pair_polarizability`` α_α + α_β - α_a - α_b in
    MHz/(V/cm)².
    """

    label: str
    a: RydbergLevel
    b: RydbergLevel
    alpha: RydbergLevel
    beta: RydbergLevel
    two_ma: int
    two_mb: int
    two_malpha: int
    two_mbeta: int
    delta0: float
    c3: float
    q: float
    pair_polarizability: float | None = None
    q_published: float | None = None
    table_row: int | None = None
    pair_row: int | None = None

    def __post_init__(self):
        if self.two_ma + self.two_mb != self.two_malpha + self.two_mbeta:
            raise ValueError(f"{self.label}: projections not conserved")

    @property
    def final_state(self) -> tuple:
        return (self.alpha, self.two_malpha, self.beta, self.two_mbeta)

    def recomputed_q(self) -> float:
        return angular_factor(self.a, self.b, self.alpha, self.beta,
                              self.two_ma / 2, self.two_mb / 2,
                              self.two_malpha / 2, self.two_mbeta / 2)

    @property
    def delta0_mhz(self) -> float:
        return self.delta0 / TWO_PI


@dataclass(frozen=True)
class ChannelTables:
    """Parsed content of the channel data file."""

    polarizabilities: PolarizabilityTable
    pair_rows: dict
    sublevel_rows: list
    sha256: str
    version: str


def load_tables(path=None) -> ChannelTables:
    """Read and schema-validate the channel data file."""
    import jsonschema

    path = Path(path or catalog_path())
    raw = path.read_bytes()
    data = json.loads(raw)
    schema = json.loads(_schema_path().read_text())
    jsonschema.validate(data, schema)
    pols = PolarizabilityTable(
        Polarizability(RydbergLevel.parse(p["level"]), abs(_half(p["abs_mj"])), float(p["alpha"]))
        for p in data["polarizabilities"]
    )
    pair_rows = {row["row"]: row for row in data["pair_channels"]}
    return ChannelTables(pols, pair_rows, list(data["sublevel_channels"]),
                         hashlib.sha256(raw).hexdigest(), data["version"])


def _make_channel(label, pair, two_m, pols: PolarizabilityTable, q, **extra) -> ChannelSpec:
    a, b = (RydbergLevel.parse(x) for x in pair["initial"])
    al, be = (RydbergLevel.parse(x) for x in pair["final"])
    tma, tmb, tmal, tmbe = two_m
    try:
        pair_alpha = (pols.alpha(al, tmal / 2) + pols.alpha(be, tmbe / 2)
                      - pols.alpha(a, tma / 2) - pols.alpha(b, tmb / 2))
    except MissingPolarizability:
        pair_alpha = None
    return ChannelSpec(label, a, b, al, be, tma, tmb, tmal, tmbe,
                       TWO_PI * float(pair["delta0"]), float(pair["c3"]), q,
                       pair_polarizability=pair_alpha, pair_row=pair["row"], **extra)


def build_catalog(path=None, coupling_floor: float = DEFAULT_COUPLING_FLOOR,
                  tolerance: float = 1e-12) -> list[ChannelSpec]:
    """Channels coupled to the initial pair, in sublevel-table order.

    Every stored angular factor is recomputed and must agree to
    ``tolerance``. Pair-table rows from the same initial pair that have no
    sublevel entry are added with all projections 1/2 if
    |C3·Q| ≥ ``coupling_floor``; rows starting from other pairs are ignored.
    """
    tables = load_tables(path)
    channels = []
    used_rows = set()
    for row in tables.sublevel_rows:
        pair = tables.pair_rows[row["pair_row"]]
        two_m = tuple(_half(x) for x in row["m_initial"] + row["m_final"])
        ch = _make_channel(f"ch{row['row']}", pair, two_m, tables.polarizabilities, float(row["q"]),
                           q_published=_eval_expr(row["q_published"]), table_row=row["row"])
        q_check = ch.recomputed_q()
        if abs(q_check - ch.q) > tolerance:
            raise CatalogMismatch(f"{ch.label}: stored Q={ch.q!r}, recomputed {q_check!r}")
        channels.append(ch)
        used_rows.add(row["pair_row"])

    if not channels:
        return channels
    initial = (channels[0].a, channels[0].b)
    for num, pair in sorted(tables.pair_rows.items()):
        if num in used_rows:
            continue
        if tuple(RydbergLevel.parse(x) for x in pair["initial"]) != initial:
            continue
        ch = _make_channel(f"pair{num}", pair, (1, 1, 1, 1), tables.polarizabilities, 0.0)
        q = ch.recomputed_q()
        if abs(ch.c3 * q) < coupling_floor:
            continue
        channels.append(_make_channel(f"pair{num}", pair, (1, 1, 1, 1), tables.polarizabilities, q))
    return channels


def coupling(ch: ChannelSpec, R: float, c3_unit: str = "angular") -> float:
    """Dipole-dipole coupling C3·Q/R³ between the initial pair and ``ch`` (rad/μs)."""
    if R <= 0:
        raise ValueError("R must be positive")
    scale = {"angular": 1.0, "ordinary": TWO_PI}[c3_unit]
    return scale * ch.c3 * ch.q / R**3


@dataclass(frozen=True)
class CollectiveBasis:
    """Ordered two-atom states: the initial pair followed by each channel's final pair."""

    channels: tuple[ChannelSpec, ...]

    def __post_init__(self):
        finals = [(ch.alpha, ch.two_malpha, ch.beta, ch.two_mbeta) for ch in self.channels]
        if len(set(finals)) != len(finals):
            raise ValueError("channel final states must be distinct")

    def __len__(self):
        return 1 + len(self.channels)

    @property
    def labels(self) -> list[str]:
        ch0 = self.channels[0]
        out = [f"{ch0.a} {ch0.two_ma:+d}/2; {ch0.b} {ch0.two_mb:+d}/2"]
        for ch in self.channels:
            out.append(f"{ch.alpha} {ch.two_malpha:+d}/2; {ch.beta} {ch.two_mbeta:+d}/2")
        return out


@dataclass(frozen=True)
class PairHamiltonian:
    """Star-topology Hamiltonian H(E) of the initial pair and its channels.

    H(E) = H0 + E² H2 in rad/μs, where H0 holds the zero-field defects and
    couplings and H2 the Stark coefficients.
    """

    channels: tuple[ChannelSpec, ...]
    R: float
    c3_unit: str = "angular"
    basis: CollectiveBasis = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "basis", CollectiveBasis(self.channels))
        for ch in self.channels:
            if ch.pair_polarizability is None:
                raise MissingPolarizability(f"{ch.label} has no pair polarizability")

    @property
    def dim(self) -> int:
        return 1 + len(self.channels)

    @property
    def couplings(self) -> np.ndarray:
        return np.array([coupling(ch, self.R, self.c3_unit) for ch in self.channels])

    def split(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.dim
        h0 = np.zeros((n, n))
        h2 = np.zeros((n, n))
        v = self.couplings
        h0[0, 1:] = v
        h0[1:, 0] = v
        idx = np.arange(1, n)
        h0[idx, idx] = [ch.delta0 for ch in self.channels]
        h2[idx, idx] = [-0.5 * TWO_PI * ch.pair_polarizability for ch in self.channels]
        return h0, h2

    def __call__(self, E: float) -> np.ndarray:
        return hamiltonian_at(self, E)


def hamiltonian_at(h: PairHamiltonian, E: float) -> np.ndarray:
    """The Hermitian matrix H(E) in rad/μs."""
    if E < 0:
        raise ValueError("field magnitude must be non-negative")
    n = h.dim
    out = np.zeros((n, n))
    v = h.couplings
    out[0, 1:] = v
    out[1:, 0] = v
    for k, ch in enumerate(h.channels, start=1):
        out[k, k] = pair_detuning(ch, E)
    return out
