"""Additive maps from the flat torus R^n/Z^n to R.

Group operations are exact (rational coordinates reduced mod 1); only the
oracle values are binary64. On a finite grid subgroup every element has
finite order, so additivity alone forces the zero map; :func:`torsion_vanishing`
checks exactly that on a values table.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Mapping, Sequence

import numpy as np

from .core import (
    AdditiveLabError,
    GridSpec,
    Oracle,
    OracleFailure,
    Parallelepiped,
    fsum_values,
    parse_rational,
)
from .estimator import (
    AlphaSearchPolicy,
    Inconclusive,
    Linear,
    NonlinearWitness,
    run_pipeline,
)

ADDITIVITY_TOLERANCE = 1e-9


class IncompleteData(AdditiveLabError):
    pass


def _wrap(q: Fraction) -> Fraction:
    return q - math.floor(q)


class TorusPoint:
    """Point of ``R^n/Z^n`` with coordinates in ``[0, 1)``."""

    __slots__ = ("coords",)

    def __init__(self, coords: Sequence):
        self.coords = tuple(_wrap(parse_rational(c) if isinstance(c, str) else Fraction(c)) for c in coords)

    @classmethod
    def zero(cls, n: int) -> "TorusPoint":
        return cls((0,) * n)

    @property
    def dim(self) -> int:
        return len(self.coords)

    def __add__(self, other: "TorusPoint") -> "TorusPoint":
        if not isinstance(other, TorusPoint):
            return NotImplemented
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
        return TorusPoint(a + b for a, b in zip(self.coords, other.coords))

    def __neg__(self) -> "TorusPoint":
        return TorusPoint(-a for a in self.coords)

    def __mul__(self, k: int) -> "TorusPoint":
        if not isinstance(k, int):
            return NotImplemented
        return TorusPoint(k * a for a in self.coords)

    __rmul__ = __mul__

    def scale(self, q) -> "TorusPoint":
        """Scale the representative in ``[0,1)^n`` by ``q`` (a lift, then reduce)."""
        q = Fraction(q)
        return TorusPoint(q * a for a in self.coords)

    def to_floats(self) -> tuple[float, ...]:
        return tuple(float(a) for a in self.coords)

    def __eq__(self, other):
        return isinstance(other, TorusPoint) and self.coords == other.coords

    def __hash__(self):
        return hash(self.coords)

    def __repr__(self):
        return "TorusPoint(" + ", ".join(str(a) for a in self.coords) + ")"


def torus_add(a: TorusPoint, b: TorusPoint) -> TorusPoint:
    return a + b


@dataclass(frozen=True)
class GridSubgroup:
    """Points with all coordinates in ``{0, 1/q, ..., (q-1)/q}``; order ``q**n``."""

    q: int
    n: int = 1

    def __post_init__(self):
        if self.q < 1 or self.n < 1:
            raise ValueError("q and n must be positive")

    @property
    def order(self) -> int:
        return self.q ** self.n

    def points(self) -> list[TorusPoint]:
        """Canonical (lexicographic) order."""
        return [TorusPoint(Fraction(k, self.q) for k in ks) for ks in product(range(self.q), repeat=self.n)]

    def index_of(self, p: TorusPoint) -> int:
        idx = 0
        for a in p.coords:
            k = a * self.q
            if k.denominator != 1:
                raise ValueError(f"{p!r} is not in the 1/{self.q} grid")
            idx = idx * self.q + int(k)
        return idx


# -- torsion argument --------------------------------------------------------

@dataclass(frozen=True)
class Zero:
    kind = "zero"


@dataclass(frozen=True)
class AdditivityViolation:
    x: TorusPoint
    y: TorusPoint
    defect: float

    kind = "additivity_violation"


@dataclass(frozen=True)
class NonzeroValue:
    x: TorusPoint
    value: float

    kind = "nonzero_value"


def torsion_vanishing(values: Mapping[TorusPoint, float], q: int, n: int | None = None,
                      tolerance: float = ADDITIVITY_TOLERANCE):
    """Zero, or the first additivity violation in canonical ``(x, y)`` order.

    ``f(0) = 0`` is checked first (as the pair ``(0, 0)``).
    """
    if n is None:
        n = next(iter(values)).dim if values else 1
    G = GridSubgroup(q, n)
    pts = G.points()
    missing = [p for p in pts if p not in values]
    if missing:
        raise IncompleteData(f"no value for grid point {missing[0]!r}")
    v = np.array([float(values[p]) for p in pts])
    if not np.all(np.isfinite(v)):
        raise IncompleteData("values must be finite")
    if abs(v[0]) > tolerance:
        return AdditivityViolation(pts[0], pts[0], float(v[0]))
    # digit-wise addition table on the grid indices
    digits = np.array(list(product(range(q), repeat=n)), dtype=np.int64)
    weights = q ** np.arange(n - 1, -1, -1)
    sums = ((digits[:, None, :] + digits[None, :, :]) % q) @ weights
    defect = v[sums] - v[:, None] - v[None, :]
    bad = np.abs(defect) > tolerance
    if bad.any():
        i, j = np.unravel_index(int(np.argmax(bad)), bad.shape)
        return AdditivityViolation(pts[i], pts[j], float(defect[i, j]))
    # additivity within tol forces |f| <= tol; the slack covers rounding in the defects
    slack = tolerance * (1 + 1e-9) + 8 * np.finfo(float).eps * float(np.max(np.abs(v)))
    big = np.abs(v) > slack
    if big.any():
        k = int(np.argmax(big))
        return NonzeroValue(pts[k], float(v[k]))
    return Zero()


def read_values_csv(text: str) -> dict[TorusPoint, float]:
    """Rows ``x1,...,xn,value`` with ``p/q`` coordinates; an ``x...`` header is skipped."""
    out: dict[TorusPoint, float] = {}
    dim = None
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if lineno == 1 and row[0].strip().lower().startswith("x"):
            continue
        if len(row) < 2:
            raise ValueError(f"line {lineno}: need at least one coordinate and a value")
        if dim is None:
            dim = len(row) - 1
        elif len(row) - 1 != dim:
            raise ValueError(f"line {lineno}: expected {dim} coordinates, got {len(row) - 1}")
        try:
            p = TorusPoint(parse_rational(c.strip()) for c in row[:-1])
            out[p] = float(row[-1])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    return out


# -- Haar shift invariance ---------------------------------------------------

def torus_nodes(grid: GridSpec, shift: TorusPoint | None = None, reduce: bool = True) -> np.ndarray:
    """Midpoint nodes of ``[0,1)^n`` plus ``shift``, computed exactly then rounded once.

    With ``reduce`` the nodes are taken mod 1; grid-aligned shifts then permute
    the node set without changing any float.
    """
    n = grid.dim
    s = shift.coords if shift is not None else (Fraction(0),) * n
    if len(s) != n:
        raise ValueError(f"shift dimension {len(s)} != grid dimension {n}")
    axes = []
    for k, m in enumerate(grid.resolution):
        col = [Fraction(2 * j + 1, 2 * m) + s[k] for j in range(m)]
        axes.append([float(_wrap(c) if reduce else c) for c in col])
    mesh = np.meshgrid(*[np.array(a) for a in axes], indexing="ij")
    return np.stack([a.ravel() for a in mesh], axis=1)


def torus_quadrature(h: Oracle, grid: GridSpec, shift: TorusPoint | None = None) -> complex | float:
    """Midpoint rule for the Haar integral over ``[0,1)^n``.

    Torus-tagged oracles see representatives in ``[0,1)^n``; euclidean-tagged
    oracles are asked for the unreduced lift ``x + y`` and must supply their
    own periodic extension.
    """
    if h.dim != grid.dim:
        raise ValueError(f"oracle dimension {h.dim} != grid dimension {grid.dim}")
    nodes = torus_nodes(grid, shift, reduce=h.domain == "torus")
    values = np.asarray(h.at(nodes))
    bad = ~np.isfinite(values)
    if bad.any():
        j = int(np.argmax(bad))
        raise OracleFailure(f"oracle returned {values[j]} at node {tuple(nodes[j])}", node=tuple(nodes[j]))
    return fsum_values(values) / len(values)


def haar_shift_defect(h: Oracle, y: TorusPoint, grid: GridSpec) -> float:
    return abs(torus_quadrature(h, grid, y) - torus_quadrature(h, grid))


# -- classification ----------------------------------------------------------

@dataclass(frozen=True)
class TorusWitness:
    """Evidence that ``f`` is not the zero homomorphism.

    ``reason`` is ``"phase"`` (phase test failed), ``"lattice"`` (the 1/7 probe
    showed ``exp(2 pi i/7)``) or ``"not_additive"`` (the 1/7 probe kept phase 1,
    so ``f`` is not Q-homogeneous there).
    """

    reason: str
    point: object
    alpha: Fraction
    phase: complex
    value: float

    kind = "witness"


def unit_fraction_policy(max_denominator: int = 32, threshold: float = 0.1) -> AlphaSearchPolicy:
    return AlphaSearchPolicy(max_denominator, threshold, unit_fractions=True)


def torus_classify(f: Oracle, probes: Sequence[TorusPoint], grid: GridSpec | None = None,
                   policy: AlphaSearchPolicy | None = None):
    """Zero, TorusWitness, or Inconclusive (no usable alpha / oracle failure)."""
    n = f.dim
    grid = grid or GridSpec.default(n)
    policy = policy or unit_fraction_policy()
    if not policy.unit_fractions:
        policy = AlphaSearchPolicy(policy.max_denominator, policy.threshold, unit_fractions=True)
    frame = Parallelepiped.unit_cube(n)
    verdict = run_pipeline(f, frame, lambda h: torus_quadrature(h, grid), 1.0, policy, probes,
                           coefficient=np.zeros(n))
    if isinstance(verdict, Linear):
        return Zero()
    if isinstance(verdict, NonlinearWitness):
        reason = "lattice" if "lattice" in verdict.diagnostics and \
            verdict.diagnostics["lattice"]["outcome"] == "refuted" else "phase"
        return TorusWitness(reason, verdict.point, verdict.alpha, verdict.phase, verdict.residual)
    lat = verdict.diagnostics.get("lattice")
    if lat is not None and lat["outcome"] == "not_additive_at_probe":
        return TorusWitness("not_additive", lat["point"], verdict.diagnostics["alpha"], lat["phase"], lat["value"])
    return verdict
