"""Shared substrate: exact rationals, parallelepipeds, oracles and midpoint quadrature.

Real scalars are binary64 on the sampling side. Points that must stay exact
(elements of a finitely generated Q-span) subclass :class:`ExactPoint`; an
oracle that understands them carries an ``exact_fn`` and an ``embed`` map.
"""

from __future__ import annotations

import abc
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Any, Callable, Sequence

import numpy as np

Rational = Fraction

DET_TOLERANCE = 1e-12

_RATIONAL_RE = re.compile(r"^\s*([+-]?\d+)\s*(?:/\s*([+-]?\d+)\s*)?$")


class AdditiveLabError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateDomain(AdditiveLabError):
    pass


class OracleFailure(AdditiveLabError):
    def __init__(self, message: str, node: Any = None):
        super().__init__(message)
        self.node = node


def parse_rational(text: str | int | Fraction) -> Fraction:
    """Parse ``"p/q"`` (or a bare integer) into a canonical Fraction.

    >>> parse_rational("6/-4")
    Traceback (most recent call last):
    ...
    ValueError: denominator must be positive: '6/-4'
    >>> parse_rational("6/4")
    Fraction(3, 2)
    """
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int) and not isinstance(text, bool):
        return Fraction(text)
    if not isinstance(text, str):
        raise ValueError(f"rational must be a 'p/q' string, got {text!r}")
    m = _RATIONAL_RE.match(text)
    if m is None:
        raise ValueError(f"malformed rational: {text!r}")
    num = int(m.group(1))
    den = int(m.group(2)) if m.group(2) is not None else 1
    if den <= 0:
        raise ValueError(f"denominator must be positive: {text!r}")
    return Fraction(num, den)


def format_rational(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


def height(q: Fraction) -> int:
    return max(abs(q.numerator), q.denominator)


class ExactPoint(abc.ABC):
    """A point living in an exact Q-module (e.g. a formal Q-span)."""

    @abc.abstractmethod
    def __add__(self, other): ...

    @abc.abstractmethod
    def scale(self, q: Fraction): ...


def scale_point(p, q: Fraction):
    """Multiply a point of any supported kind by the rational ``q``."""
    if isinstance(p, ExactPoint) or hasattr(p, "scale"):
        return p.scale(q)
    return np.asarray(p, dtype=float) * float(q)


def as_float_point(p, dim: int) -> np.ndarray:
    if hasattr(p, "to_floats"):
        p = p.to_floats()
    arr = np.atleast_1d(np.asarray(p, dtype=float))
    if arr.shape != (dim,):
        raise ValueError(f"expected a point of dimension {dim}, got shape {arr.shape}")
    return arr


def _exact_det(rows: Sequence[Sequence[Fraction]]) -> Fraction:
    a = [list(map(Fraction, r)) for r in rows]
    n = len(a)
    det = Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            a[col], a[pivot] = a[pivot], a[col]
            det = -det
        det *= a[col][col]
        for r in range(col + 1, n):
            factor = a[r][col] / a[col][col]
            if factor:
                for k in range(col, n):
                    a[r][k] -= factor * a[col][k]
    return det


def _is_rational_entry(x) -> bool:
    return isinstance(x, (int, Fraction)) and not isinstance(x, bool)


@dataclass(frozen=True)
class Parallelepiped:
    """Compact parallelepiped ``base + sum t_k u_k``, ``t in [0,1]^n``.

    ``exact_base``/``exact_generators`` optionally give the same frame as
    exact points so that oracles defined only on a Q-span can be sampled.
    Rational (int/Fraction) generator entries are checked for degeneracy
    with an exact determinant instead of the float tolerance.
    """

    base: tuple
    generators: tuple
    exact_base: ExactPoint | None = None
    exact_generators: tuple | None = None
    _det: float = field(default=0.0, init=False, repr=False, compare=False)

    def __post_init__(self):
        gens = tuple(tuple(np.atleast_1d(g).tolist()) if not isinstance(g, (tuple, list)) else tuple(g)
                     for g in self.generators)
        n = len(gens)
        if n == 0 or any(len(g) != n for g in gens):
            raise DegenerateDomain(f"need n generators of dimension n, got {gens!r}")
        base = tuple(float(b) for b in np.atleast_1d(np.asarray(self.base, dtype=float)))
        if len(base) != n:
            raise DegenerateDomain(f"base has dimension {len(base)}, generators {n}")
        if all(_is_rational_entry(x) for g in gens for x in g):
            exact = _exact_det(gens)
            if exact == 0:
                raise DegenerateDomain("generators are linearly dependent (exact determinant 0)")
            det = float(exact)
        else:
            det = float(np.linalg.det(np.array(gens, dtype=float)))
            if abs(det) <= DET_TOLERANCE:
                raise DegenerateDomain(f"|det(generators)| = {abs(det):.3g} <= {DET_TOLERANCE}")
        fgens = tuple(tuple(float(x) for x in g) for g in gens)
        if not all(math.isfinite(x) for g in fgens for x in g) or not all(math.isfinite(b) for b in base):
            raise DegenerateDomain("non-finite coordinates")
        if (self.exact_base is None) != (self.exact_generators is None):
            raise ValueError("exact_base and exact_generators must be given together")
        if self.exact_generators is not None and len(self.exact_generators) != n:
            raise ValueError("exact frame must have one exact generator per axis")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "generators", fgens)
        if self.exact_generators is not None:
            object.__setattr__(self, "exact_generators", tuple(self.exact_generators))
        object.__setattr__(self, "_det", det)

    @classmethod
    def interval(cls, a: float, b: float) -> "Parallelepiped":
        if not b > a:
            raise DegenerateDomain(f"empty interval [{a}, {b}]")
        return cls((a,), ((b - a,),))

    @classmethod
    def box(cls, lower: Sequence[float], upper: Sequence[float]) -> "Parallelepiped":
        n = len(lower)
        if len(upper) != n:
            raise ValueError("lower and upper corners differ in dimension")
        gens = []
        for k in range(n):
            row = [0.0] * n
            row[k] = upper[k] - lower[k]
            gens.append(tuple(row))
        return cls(tuple(lower), tuple(gens))

    @classmethod
    def unit_cube(cls, n: int) -> "Parallelepiped":
        return cls((0,) * n, tuple(tuple(int(i == k) for i in range(n)) for k in range(n)))

    @property
    def dim(self) -> int:
        return len(self.base)

    @property
    def is_exact(self) -> bool:
        return self.exact_generators is not None

    def volume(self) -> float:
        return abs(self._det)

    def generator_matrix(self) -> np.ndarray:
        """Rows are the generators."""
        return np.array(self.generators, dtype=float)


def volume(I: Parallelepiped) -> float:
    return I.volume()


@dataclass(frozen=True)
class GridSpec:
    resolution: tuple

    def __post_init__(self):
        res = tuple(int(m) for m in self.resolution)
        if not res or any(m < 1 for m in res):
            raise ValueError(f"grid resolution must be positive integers, got {self.resolution!r}")
        object.__setattr__(self, "resolution", res)

    @classmethod
    def uniform(cls, n: int, m: int) -> "GridSpec":
        return cls((m,) * n)

    @classmethod
    def default(cls, n: int) -> "GridSpec":
        return cls.uniform(n, 4096 if n == 1 else 64)

    @property
    def dim(self) -> int:
        return len(self.resolution)

    @property
    def total(self) -> int:
        return math.prod(self.resolution)

    def fractions(self) -> list[tuple[Fraction, ...]]:
        """Midpoint parameters ``(j_k + 1/2)/m_k`` in canonical (row-major) order."""
        axes = [[Fraction(2 * j + 1, 2 * m) for j in range(m)] for m in self.resolution]
        return list(product(*axes))


@dataclass(frozen=True)
class Oracle:
    """Deterministic function of a point.

    ``fn`` maps an ``(N, dim)`` float array to ``N`` values. ``exact_fn``
    (optional) maps a sequence of :class:`ExactPoint` to ``N`` values and
    ``embed`` maps the same sequence to their ``(N, dim)`` float images.
    """

    fn: Callable[[np.ndarray], np.ndarray] | None
    dim: int
    kind: str = "real"
    domain: str = "euclidean"
    exact_fn: Callable[[Sequence[ExactPoint]], np.ndarray] | None = None
    embed: Callable[[Sequence[ExactPoint]], np.ndarray] | None = None
    label: str = ""

    def __post_init__(self):
        if self.kind not in ("real", "complex"):
            raise ValueError(f"unknown oracle kind {self.kind!r}")
        if self.domain not in ("euclidean", "torus"):
            raise ValueError(f"unknown domain tag {self.domain!r}")
        if self.fn is None and self.exact_fn is None:
            raise ValueError("oracle needs fn or exact_fn")

    @classmethod
    def from_function(cls, func: Callable, dim: int = 1, *, vectorized: bool = False,
                      kind: str = "real", domain: str = "euclidean", label: str = "") -> "Oracle":
        """Wrap a plain function.

        Non-vectorized functions receive a float (``dim == 1``) or a 1-D
        array; vectorized ones receive the ``(N, dim)`` array.
        """
        dtype = complex if kind == "complex" else float
        if vectorized:
            def fn(X):
                return np.asarray(func(X), dtype=dtype).reshape(len(X))
        elif dim == 1:
            def fn(X):
                return np.array([func(float(x[0])) for x in X], dtype=dtype)
        else:
            def fn(X):
                return np.array([func(x) for x in X], dtype=dtype)
        return cls(fn, dim, kind=kind, domain=domain, label=label)

    @property
    def exact(self) -> bool:
        return self.exact_fn is not None

    def at(self, X: np.ndarray) -> np.ndarray:
        if self.fn is None:
            raise OracleFailure(f"oracle {self.label or ''} accepts exact points only".strip())
        X = np.asarray(X, dtype=float).reshape(-1, self.dim)
        return self.fn(X)

    def at_exact(self, points: Sequence[ExactPoint]) -> np.ndarray:
        if self.exact_fn is None:
            if self.embed is None:
                raise OracleFailure("oracle has no exact evaluation path")
            return self.at(self.embed(points))
        return self.exact_fn(list(points))

    def values(self, points: Sequence) -> np.ndarray:
        points = list(points)
        if points and isinstance(points[0], ExactPoint):
            return self.at_exact(points)
        return self.at(np.array([as_float_point(p, self.dim) for p in points]).reshape(-1, self.dim))

    def __call__(self, point):
        return self.values([point])[0]

    def lift(self, embed: Callable[[Sequence[ExactPoint]], np.ndarray]) -> "Oracle":
        """Give a float oracle an exact path that evaluates at ``embed(points)``."""
        fn = self.fn
        if fn is None:
            raise ValueError("lift needs a float evaluation path")
        return Oracle(fn, self.dim, kind=self.kind, domain=self.domain,
                      exact_fn=lambda pts: fn(embed(pts)), embed=embed, label=self.label)

    def derive(self, op: Callable[[np.ndarray, np.ndarray], np.ndarray], *,
               kind: str | None = None, label: str = "") -> "Oracle":
        """New oracle ``x -> op(x_float, self(x))`` preserving the exact path."""
        base = self
        fn = None
        if base.fn is not None:
            def fn(X):
                return op(X, base.fn(X))
        exact_fn = None
        if base.exact_fn is not None and base.embed is not None:
            def exact_fn(pts):
                return op(base.embed(pts), base.exact_fn(pts))
        return Oracle(fn, base.dim, kind=kind or base.kind, domain=base.domain,
                      exact_fn=exact_fn, embed=base.embed, label=label or base.label)


def constant_oracle(value: complex | float, dim: int = 1) -> Oracle:
    kind = "complex" if isinstance(value, complex) else "real"
    dtype = complex if kind == "complex" else float

    def fn(X):
        return np.full(len(X), value, dtype=dtype)

    def exact_fn(pts):
        return np.full(len(pts), value, dtype=dtype)

    return Oracle(fn, dim, kind=kind, exact_fn=exact_fn, label=f"const {value}")


def midpoint_nodes(I: Parallelepiped, grid: GridSpec, shift=None) -> np.ndarray:
    """Float midpoint nodes (plus shift) in canonical row-major order."""
    if grid.dim != I.dim:
        raise ValueError(f"grid dimension {grid.dim} != domain dimension {I.dim}")
    axes = [(np.arange(m) + 0.5) / m for m in grid.resolution]
    mesh = np.meshgrid(*axes, indexing="ij")
    T = np.stack([a.ravel() for a in mesh], axis=1)
    nodes = np.asarray(I.base) + T @ I.generator_matrix()
    if shift is not None:
        nodes = nodes + as_float_point(shift, I.dim)
    return nodes


@lru_cache(maxsize=32)
def _exact_nodes_cached(base, gens, resolution, shift):
    out = []
    for ts in GridSpec(resolution).fractions():
        p = base
        for t, g in zip(ts, gens):
            p = p + g.scale(t)
        if shift is not None:
            p = p + shift
        out.append(p)
    return tuple(out)


def exact_midpoint_nodes(I: Parallelepiped, grid: GridSpec, shift: ExactPoint | None = None):
    if not I.is_exact:
        raise OracleFailure("domain has no exact frame; cannot produce exact nodes")
    if grid.dim != I.dim:
        raise ValueError(f"grid dimension {grid.dim} != domain dimension {I.dim}")
    return _exact_nodes_cached(I.exact_base, I.exact_generators, grid.resolution, shift)


def _check_finite(values: np.ndarray, nodes) -> None:
    bad = ~np.isfinite(values)
    if bad.any():
        j = int(np.argmax(bad))
        node = nodes[j]
        raise OracleFailure(f"oracle returned {values[j]} at node {node!r}", node=node)


def sample(h: Oracle, I: Parallelepiped, grid: GridSpec, shift=None) -> np.ndarray:
    """Oracle values at the (shifted) midpoint nodes, canonical order."""
    if h.dim != I.dim:
        raise ValueError(f"oracle dimension {h.dim} != domain dimension {I.dim}")
    use_exact = isinstance(shift, ExactPoint) or (h.fn is None) or (
        shift is None and h.exact and I.is_exact)
    if use_exact:
        nodes = exact_midpoint_nodes(I, grid, shift)
        values = np.asarray(h.at_exact(nodes))
    else:
        nodes = midpoint_nodes(I, grid, shift)
        values = np.asarray(h.at(nodes))
    _check_finite(values, nodes)
    return values


def fsum_values(values: np.ndarray) -> complex | float:
    """Exactly rounded sum; independent of evaluation order."""
    if np.iscomplexobj(values):
        return complex(math.fsum(values.real.tolist()), math.fsum(values.imag.tolist()))
    return math.fsum(values.tolist())


def weighted_total(values: np.ndarray, vol: float) -> complex | float:
    return fsum_values(values) * vol / len(values)


def midpoint_quadrature(h: Oracle, I: Parallelepiped, grid: GridSpec, shift=None) -> complex | float:
    """Midpoint rule ``vol/N * sum h(x_j + shift)`` over the uniform grid on ``I``."""
    return weighted_total(sample(h, I, grid, shift), I.volume())
