"""Additive functions on finitely generated Q-subspaces of R.

A :class:`HamelBasis` names finitely many reals that the caller asserts are
linearly independent over Q. A :class:`QVector` is a formal rational
combination of them and an :class:`AdditiveMap` assigns a rational value to
each basis symbol, extended Q-linearly. Everything here is exact; the only
float boundary is :func:`embed` (and the oracle built by :func:`hamel_oracle`).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .core import (
    AdditiveLabError,
    ExactPoint,
    Oracle,
    Parallelepiped,
    format_rational,
    height,
    parse_rational,
)


class UnknownSymbol(AdditiveLabError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown symbol"


class InvalidWindow(AdditiveLabError, ValueError):
    pass


class HamelSchemaError(AdditiveLabError, ValueError):
    """Malformed Hamel JSON; ``location`` points at the offending field."""

    def __init__(self, location: str, message: str):
        super().__init__(f"{location}: {message}")
        self.location = location


@dataclass(frozen=True)
class HamelBasis:
    labels: tuple
    embeddings: tuple
    # Q-independence of the embeddings is a declaration, never verified.
    independence: str = "asserted"

    def __post_init__(self):
        labels = tuple(str(s) for s in self.labels)
        embeddings = tuple(float(e) for e in self.embeddings)
        if not labels:
            raise ValueError("a basis needs at least one symbol")
        if len(labels) != len(embeddings):
            raise ValueError("labels and embeddings differ in length")
        seen = set()
        for lab in labels:
            if lab in seen:
                raise ValueError(f"duplicate label {lab!r}")
            seen.add(lab)
        for lab, e in zip(labels, embeddings):
            if not math.isfinite(e) or e == 0.0:
                raise ValueError(f"embedding of {lab!r} must be finite and nonzero")
        if len(set(embeddings)) != len(embeddings):
            raise ValueError("embeddings must be pairwise distinct")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "embeddings", embeddings)

    @classmethod
    def standard(cls, m: int = 2) -> "HamelBasis":
        """``(1)``, ``(1, sqrt 2)`` or ``(1, sqrt 2, sqrt 3)``.

        These are Q-independent: a relation ``a + b*sqrt2 + c*sqrt3 = 0``
        with rational coefficients forces ``a = b = c = 0`` (square both
        sides of ``b*sqrt2 + c*sqrt3 = -a``; irrationality of sqrt6,
        sqrt2, sqrt3 finishes it).
        """
        if m not in (1, 2, 3):
            raise ValueError("standard bases have 1, 2 or 3 symbols")
        embs = (1.0, math.sqrt(2.0), math.sqrt(3.0))[:m]
        return cls(tuple(f"e{k + 1}" for k in range(m)), embs, independence="proved: 1, sqrt2, sqrt3")

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise UnknownSymbol(f"unknown symbol {label!r}") from None

    def unit(self, label_or_index) -> "QVector":
        i = label_or_index if isinstance(label_or_index, int) else self.index(label_or_index)
        self.check_index(i)
        return QVector({i: 1})

    def check_index(self, i: int) -> None:
        if not 0 <= i < len(self.labels):
            raise UnknownSymbol(f"unknown symbol index {i}")


class QVector(ExactPoint):
    """Formal rational combination of basis symbols (by index).

    Zero coordinates are never stored; the zero vector is empty.
    """

    __slots__ = ("_coords", "_hash")

    def __init__(self, coords: Mapping[int, Fraction | int | str] | Iterable = ()):
        items = coords.items() if isinstance(coords, Mapping) else coords
        acc: dict[int, Fraction] = {}
        for i, q in items:
            q = parse_rational(q) if isinstance(q, str) else Fraction(q)
            acc[int(i)] = acc.get(int(i), Fraction(0)) + q
        self._coords = tuple(sorted((i, q) for i, q in acc.items() if q != 0))
        self._hash = hash(self._coords)

    @classmethod
    def zero(cls) -> "QVector":
        return cls()

    @property
    def coords(self) -> dict[int, Fraction]:
        return dict(self._coords)

    def items(self):
        return iter(self._coords)

    def support(self) -> tuple[int, ...]:
        return tuple(i for i, _ in self._coords)

    def __getitem__(self, i: int) -> Fraction:
        return dict(self._coords).get(i, Fraction(0))

    def is_zero(self) -> bool:
        return not self._coords

    def __add__(self, other: "QVector") -> "QVector":
        if not isinstance(other, QVector):
            return NotImplemented
        return QVector(list(self._coords) + list(other._coords))

    def __neg__(self) -> "QVector":
        return QVector((i, -q) for i, q in self._coords)

    def __sub__(self, other: "QVector") -> "QVector":
        if not isinstance(other, QVector):
            return NotImplemented
        return self + (-other)

    def scale(self, q) -> "QVector":
        q = Fraction(q)
        return QVector((i, q * c) for i, c in self._coords)

    def __mul__(self, q):
        if isinstance(q, (int, Fraction)) and not isinstance(q, bool):
            return self.scale(q)
        return NotImplemented

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, QVector) and self._coords == other._coords

    def __hash__(self):
        return self._hash

    def height(self) -> int:
        return max((height(q) for _, q in self._coords), default=1)

    def __repr__(self):
        if not self._coords:
            return "QVector(0)"
        terms = " + ".join(f"({q})e{i + 1}" for i, q in self._coords)
        return f"QVector({terms})"


@dataclass(frozen=True)
class AdditiveMap:
    """Q-linear map ``f(sum q_k x_k) = sum q_k y_k`` on the span of ``basis``.

    ``scale`` is a real factor applied only where the map is sampled as a
    float oracle; exact evaluation ignores it.
    """

    basis: HamelBasis
    assignments: Mapping[int, Fraction] = field(default_factory=dict)
    scale: float = 1.0

    def __post_init__(self):
        clean = {}
        for i, y in dict(self.assignments).items():
            i = self.basis.index(i) if isinstance(i, str) else int(i)
            self.basis.check_index(i)
            y = parse_rational(y) if isinstance(y, str) else Fraction(y)
            if y != 0:
                clean[i] = y
        if not math.isfinite(self.scale) or self.scale == 0.0:
            raise ValueError("scale must be finite and nonzero")
        object.__setattr__(self, "assignments", dict(sorted(clean.items())))
        object.__setattr__(self, "scale", float(self.scale))

    def value_of(self, i: int) -> Fraction:
        return self.assignments.get(i, Fraction(0))

    def __call__(self, v: QVector) -> Fraction:
        return evaluate(self, v)

    def zero_symbols(self) -> tuple[int, ...]:
        return tuple(i for i in range(len(self.basis)) if i not in self.assignments)


def evaluate(f: AdditiveMap, v: QVector) -> Fraction:
    total = Fraction(0)
    for i, q in v.items():
        f.basis.check_index(i)
        total += q * f.assignments.get(i, 0)
    return total


def embed(basis: HamelBasis, v: QVector) -> float:
    """The real number ``sum q_k * embedding_k`` in binary64."""
    terms = []
    for i, q in v.items():
        basis.check_index(i)
        terms.append(float(q) * basis.embeddings[i])
    return math.fsum(terms)


@dataclass(frozen=True)
class AdditivityReport:
    passed: bool
    checked: int
    counterexample: tuple | None = None  # (x, y, f(x+y), f(x)+f(y))


def check_additive(f: AdditiveMap, pairs: Iterable[tuple[QVector, QVector]],
                   evaluator: Callable[[AdditiveMap, QVector], Fraction] = evaluate) -> AdditivityReport:
    """Exact check of ``f(x+y) == f(x) + f(y)`` over the given pairs.

    ``evaluator`` exists so tests can substitute a broken one.
    """
    n = 0
    for x, y in pairs:
        n += 1
        lhs = evaluator(f, x + y)
        rhs = evaluator(f, x) + evaluator(f, y)
        if lhs != rhs:
            return AdditivityReport(False, n, (x, y, lhs, rhs))
    return AdditivityReport(True, n)


def period_check(f: AdditiveMap, p: QVector) -> bool:
    """True iff ``p`` is a period of ``f``, i.e. ``f(p) == 0`` exactly."""
    return evaluate(f, p) == 0


def random_qvector(rng: np.random.Generator, m: int, max_height: int = 100,
                   support: Sequence[int] | None = None) -> QVector:
    idx = range(m) if support is None else support
    coords = {}
    for i in idx:
        den = int(rng.integers(1, max_height + 1))
        num = int(rng.integers(-max_height, max_height + 1))
        coords[i] = Fraction(num, den)
    return QVector(coords)


def random_additive_map(rng: np.random.Generator, basis: HamelBasis, max_height: int = 100) -> AdditiveMap:
    v = random_qvector(rng, len(basis), max_height)
    return AdditiveMap(basis, v.coords)


# -- oracle boundary ---------------------------------------------------------

def hamel_oracle(f: AdditiveMap) -> Oracle:
    """Exact-path oracle: QVector -> ``scale * f(v)`` as binary64."""
    memo: dict[QVector, float] = {}
    scale = f.scale

    def exact_fn(points):
        out = np.empty(len(points))
        for k, v in enumerate(points):
            val = memo.get(v)
            if val is None:
                val = scale * float(evaluate(f, v))
                memo[v] = val
            out[k] = val
        return out

    def embed_fn(points):
        return np.array([[embed(f.basis, v)] for v in points], dtype=float).reshape(-1, 1)

    return Oracle(None, 1, exact_fn=exact_fn, embed=embed_fn, label="hamel")


def interval_domain(basis: HamelBasis, a=0, b=1, symbol: int | str = 0) -> Parallelepiped:
    """The interval from ``a*x_s`` to ``b*x_s`` (``a < b`` rational), with an exact frame."""
    s = basis.index(symbol) if isinstance(symbol, str) else symbol
    basis.check_index(s)
    a, b = Fraction(a), Fraction(b)
    if not b > a:
        raise ValueError(f"need a < b, got {a}, {b}")
    e = basis.embeddings[s]
    lo, hi = sorted((float(a) * e, float(b) * e))
    unit = QVector({s: 1})
    base = unit.scale(a) if e > 0 else unit.scale(b)
    return Parallelepiped((lo,), ((hi - lo,),), exact_base=base,
                          exact_generators=(unit.scale(b - a) if e > 0 else unit.scale(a - b),))


def auto_probes(basis: HamelBasis, rng: np.random.Generator, n_random: int = 8,
                max_height: int = 100) -> list[QVector]:
    """Each ``e_i``, each ``e_i/7``, then ``n_random`` random vectors."""
    units = [QVector({i: 1}) for i in range(len(basis))]
    probes = units + [u.scale(Fraction(1, 7)) for u in units]
    probes += [random_qvector(rng, len(basis), max_height) for _ in range(n_random)]
    return probes


# -- density witness ---------------------------------------------------------

@dataclass(frozen=True)
class DensityReport:
    coverage: float
    covered: int
    cells: int
    height: int
    examined: int
    representatives: dict  # (i, j) -> (x, y, QVector)
    saturated_at: int | None = None


def rationals_up_to(max_height: int) -> list[Fraction]:
    """All rationals of height <= H, ordered by (height, value)."""
    out = []
    for den in range(1, max_height + 1):
        for num in range(-max_height, max_height + 1):
            if math.gcd(num, den) == 1:
                out.append(Fraction(num, den))
    out.sort(key=lambda q: (height(q), q))
    return out


def density_witness(f: AdditiveMap, window: Sequence[float], cells: int, max_height: int,
                    budget: int = 20_000_000) -> DensityReport:
    """Cover an ``M x M`` cell grid of ``window = (x0, x1, y0, y1)`` with graph points.

    Vectors are enumerated in shells of increasing height; within a shell in
    lexicographic order of coordinate ranks. When ``f`` has a zero-assigned
    symbol, ``x`` is reduced into the window by integer translations along
    the shortest such period. Enumeration stops early once every cell is
    covered; ``budget`` bounds the number of vectors examined otherwise.
    """
    x0, x1, y0, y1 = (float(w) for w in window)
    if not (x1 > x0 and y1 > y0):
        raise InvalidWindow(f"window {tuple(window)} has zero area")
    if cells < 1 or max_height < 1:
        raise ValueError("cells and height must be positive")
    basis = f.basis
    m = len(basis)
    embs = np.array(basis.embeddings)
    zero = f.zero_symbols()
    period = min((abs(basis.embeddings[i]) for i in zero), default=None)

    qs = rationals_up_to(max_height)
    heights = np.array([height(q) for q in qs])
    qf = np.array([float(q) for q in qs])
    # per-symbol value contributions scale*q*y_i, each rounded once
    contrib = np.array([[f.scale * float(q * f.value_of(i)) for q in qs] for i in range(m)])

    total = cells * cells
    reps: dict = {}
    examined = 0
    saturated_at = None
    for h in range(1, max_height + 1):
        n_h = int(np.searchsorted(heights, h, side="right"))
        shell_size = n_h ** m - int(np.searchsorted(heights, h - 1, side="right")) ** m
        if examined + shell_size > budget:
            raise ValueError(f"density enumeration exceeds budget of {budget} vectors at height {h}")
        grids = np.meshgrid(*[np.arange(n_h)] * m, indexing="ij")
        idx = np.stack([g.ravel() for g in grids], axis=1)
        idx = idx[heights[idx].max(axis=1) == h]
        examined += len(idx)
        xs = qf[idx] @ embs
        ys = contrib[np.arange(m), idx].sum(axis=1)
        if period is not None:
            xs = x0 + np.mod(xs - x0, period)
        keep = (xs >= x0) & (xs <= x1) & (ys >= y0) & (ys <= y1)
        ci = np.minimum(((xs - x0) / (x1 - x0) * cells).astype(np.int64), cells - 1)
        cj = np.minimum(((ys - y0) / (y1 - y0) * cells).astype(np.int64), cells - 1)
        for k in np.flatnonzero(keep):
            key = (int(ci[k]), int(cj[k]))
            if key not in reps:
                v = QVector({i: qs[idx[k, i]] for i in range(m)})
                x = embed(basis, v)
                if period is not None:
                    x = x0 + (x - x0) % period
                reps[key] = (x, f.scale * float(evaluate(f, v)), v)
        if len(reps) == total:
            saturated_at = h
            break
    return DensityReport(len(reps) / total, len(reps), cells, max_height, examined, reps, saturated_at)


# -- JSON --------------------------------------------------------------------

def to_json_dict(f: AdditiveMap) -> dict:
    doc = {
        "basis": [{"label": lab, "embedding": emb} for lab, emb in zip(f.basis.labels, f.basis.embeddings)],
        "assignments": {f.basis.labels[i]: format_rational(y) for i, y in f.assignments.items()},
    }
    if f.scale != 1.0:
        doc["scale"] = f.scale
    return doc


def dumps(f: AdditiveMap) -> str:
    return json.dumps(to_json_dict(f), indent=2) + "\n"


def from_json_dict(doc) -> AdditiveMap:
    if not isinstance(doc, dict):
        raise HamelSchemaError("$", "document must be an object")
    extra = set(doc) - {"basis", "assignments", "scale"}
    if extra:
        raise HamelSchemaError("$", f"unexpected keys {sorted(extra)}")
    basis_doc = doc.get("basis")
    if not isinstance(basis_doc, list) or not basis_doc:
        raise HamelSchemaError("basis", "must be a nonempty list")
    labels, embs = [], []
    for k, entry in enumerate(basis_doc):
        loc = f"basis[{k}]"
        if not isinstance(entry, dict) or set(entry) != {"label", "embedding"}:
            raise HamelSchemaError(loc, "must be {'label': str, 'embedding': number}")
        lab, emb = entry["label"], entry["embedding"]
        if not isinstance(lab, str) or not lab:
            raise HamelSchemaError(f"{loc}.label", "must be a nonempty string")
        if lab in labels:
            raise HamelSchemaError(f"{loc}.label", f"duplicate label {lab!r}")
        if isinstance(emb, bool) or not isinstance(emb, (int, float)):
            raise HamelSchemaError(f"{loc}.embedding", "must be a number")
        labels.append(lab)
        embs.append(float(emb))
    try:
        basis = HamelBasis(tuple(labels), tuple(embs))
    except ValueError as exc:
        raise HamelSchemaError("basis", str(exc)) from None
    assign_doc = doc.get("assignments", {})
    if not isinstance(assign_doc, dict):
        raise HamelSchemaError("assignments", "must be an object mapping label to 'p/q'")
    assignments = {}
    for lab, text in assign_doc.items():
        loc = f"assignments.{lab}"
        if lab not in labels:
            raise HamelSchemaError(loc, f"unknown symbol {lab!r}")
        if not isinstance(text, str):
            raise HamelSchemaError(loc, "rationals must be 'p/q' strings")
        try:
            assignments[labels.index(lab)] = parse_rational(text)
        except ValueError as exc:
            raise HamelSchemaError(loc, str(exc)) from None
    scale = doc.get("scale", 1.0)
    if isinstance(scale, bool) or not isinstance(scale, (int, float)) or not math.isfinite(scale) or scale == 0:
        raise HamelSchemaError("scale", "must be a finite nonzero number")
    return AdditiveMap(basis, assignments, float(scale))


def loads(text: str) -> AdditiveMap:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise HamelSchemaError(f"line {exc.lineno} column {exc.colno}", exc.msg) from None
    return from_json_dict(doc)


def qvector_to_json(basis: HamelBasis, v: QVector) -> dict:
    return {basis.labels[i]: format_rational(q) for i, q in v.items()}
