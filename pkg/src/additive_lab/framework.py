"""Linearity engine parameterized by an abstract regularity functional.

A :class:`RegularityFunctional` replaces the integral over ``I`` in the
pipeline. :func:`check_axioms` probes the five structural requirements on a
generated family of test functions:

(a) ``F(c h) = c F(h)`` for ``|c| = 1``;
(b) linear maps are admissible;
(c) admissible functions are closed under sums and positive rational multiples;
(d) ``F(exp(i g_y)) = F(exp(i g))`` for ``g`` periodic in the translation system;
(e) some rational ``alpha > 0`` has ``F(exp(i alpha g)) != 0``.

Membership in the admissible set is operational: a function is admissible
when ``F.apply`` accepts it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .core import GridSpec, Oracle, Parallelepiped, constant_oracle, midpoint_quadrature
from .estimator import (
    AlphaSearchPolicy,
    LinearityVerdict,
    exp_oracle,
    residual_oracle,
    run_pipeline,
    search_alpha,
)

AXIOM_A_TOLERANCE = 1e-9
AXIOM_D_TOLERANCE = 1e-6


@dataclass(frozen=True)
class RegularityFunctional:
    label: str
    apply: Callable[[Oracle], complex]
    frame: Parallelepiped  # its generators are the translation system
    policy: AlphaSearchPolicy = field(default_factory=AlphaSearchPolicy)
    mass: float | None = None  # |F(1)|; computed on demand when None

    def reference_mass(self) -> float:
        if self.mass is not None:
            return self.mass
        return abs(complex(self.apply(constant_oracle(1.0 + 0j, self.frame.dim))))


def integral_functional(I: Parallelepiped, grid: GridSpec | None = None,
                        policy: AlphaSearchPolicy | None = None) -> RegularityFunctional:
    grid = grid or GridSpec.default(I.dim)
    return RegularityFunctional("integral", lambda h: midpoint_quadrature(h, I, grid), I,
                                policy or AlphaSearchPolicy(), mass=I.volume())


def point_evaluation_functional(I: Parallelepiped, policy: AlphaSearchPolicy | None = None) -> RegularityFunctional:
    """``F(u) = u(base of I)``."""
    base = I.exact_base if I.is_exact else I.base

    def apply(h: Oracle) -> complex:
        if I.is_exact and h.exact:
            return complex(h.at_exact([base])[0])
        return complex(h.at(np.array([base]))[0])

    return RegularityFunctional("point-eval", apply, I, policy or AlphaSearchPolicy())


def zero_functional(I: Parallelepiped, policy: AlphaSearchPolicy | None = None) -> RegularityFunctional:
    return RegularityFunctional("zero", lambda h: 0j, I, policy or AlphaSearchPolicy(), mass=0.0)


_REGISTRY: dict[str, Callable[..., RegularityFunctional]] = {
    "integral": lambda I, grid=None, policy=None: integral_functional(I, grid, policy),
    "point-eval": lambda I, grid=None, policy=None: point_evaluation_functional(I, policy),
    "zero": lambda I, grid=None, policy=None: zero_functional(I, policy),
}


def register_functional(label: str, factory: Callable[..., RegularityFunctional]) -> None:
    """Make ``factory(I, grid=None, policy=None)`` available under ``label``."""
    if label in _REGISTRY:
        raise ValueError(f"functional {label!r} already registered")
    _REGISTRY[label] = factory


def functional_labels() -> list[str]:
    return list(_REGISTRY)


def get_functional(label: str, I: Parallelepiped, grid: GridSpec | None = None,
                   policy: AlphaSearchPolicy | None = None) -> RegularityFunctional:
    try:
        factory = _REGISTRY[label]
    except KeyError:
        raise ValueError(f"unknown functional {label!r}; known: {', '.join(_REGISTRY)}") from None
    return factory(I, grid=grid, policy=policy)


# -- test family -------------------------------------------------------------

@dataclass(frozen=True)
class TestFamily:
    linear: tuple  # (c, oracle) pairs
    periodic: tuple  # oracles periodic in the frame generators
    units: tuple  # complex numbers of modulus 1
    shifts: tuple  # float points
    rationals: tuple = (Fraction(1, 2), Fraction(3, 1), Fraction(2, 7))

    __test__ = False  # not a pytest class


def _frame_coordinates(frame: Parallelepiped) -> Callable[[np.ndarray], np.ndarray]:
    """``x -> w`` with ``x = base + sum w_k u_k``."""
    Ut = frame.generator_matrix().T
    base = np.asarray(frame.base)

    def coords(X):
        return np.linalg.solve(Ut, (X - base).T).T

    return coords


def periodic_residual(frame: Parallelepiped, c: np.ndarray, terms: Sequence[tuple]) -> Oracle:
    """Residual ``f - c.x`` of ``f = c.x + p`` with ``p`` a trigonometric polynomial of period 1 in frame coordinates.

    ``terms`` are ``(amplitude, integer wavevector, phase)``.
    """
    coords = _frame_coordinates(frame)
    c = np.asarray(c, dtype=float)

    def p(X):
        W = coords(X)
        out = np.zeros(len(X))
        for amp, k, phi in terms:
            out += float(amp) * np.cos(2 * np.pi * (W @ np.asarray(k, dtype=float)) + phi)
        return out

    f = Oracle(lambda X: X @ c + p(X), frame.dim, label="c.x + periodic")
    return residual_oracle(f, c)


def default_family(frame: Parallelepiped, seed: int = 0, size: int = 8) -> TestFamily:
    """``size`` linear maps, periodic residuals, unit constants and shifts; seeded."""
    rng = np.random.default_rng(seed)
    n = frame.dim
    linear = []
    for _ in range(size):
        c = rng.uniform(-10, 10, n)
        linear.append((c, Oracle(lambda X, c=c: X @ c, n, label="linear")))
    periodic = []
    for _ in range(size):
        c = rng.uniform(-10, 10, n)
        terms = []
        for _ in range(2):
            amp = Fraction(int(rng.integers(-3, 4)) or 1, int(rng.integers(1, 5)))
            k = rng.integers(-2, 3, n)
            if not k.any():
                k[0] = 1
            terms.append((amp, k, float(rng.uniform(0, 2 * np.pi))))
        periodic.append(periodic_residual(frame, c, terms))
    units = tuple(complex(np.exp(1j * t)) for t in rng.uniform(0, 2 * np.pi, size))
    shifts = tuple(tuple(rng.uniform(-1, 1, n)) for _ in range(4))
    return TestFamily(tuple(linear), tuple(periodic), units, shifts)


# -- axiom checks ------------------------------------------------------------

@dataclass(frozen=True)
class AxiomEntry:
    axiom: str
    passed: bool
    witness: dict | None = None

    @property
    def status(self) -> str:
        return "pass" if self.passed else "fail"


@dataclass(frozen=True)
class AxiomReport:
    functional: str
    entries: tuple  # five AxiomEntry, order a..e

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def failed(self) -> list[str]:
        return [e.axiom for e in self.entries if not e.passed]

    def __getitem__(self, axiom: str) -> AxiomEntry:
        return next(e for e in self.entries if e.axiom == axiom)


def _apply(F: RegularityFunctional, h: Oracle) -> complex:
    value = complex(F.apply(h))
    if not (math.isfinite(value.real) and math.isfinite(value.imag)):
        raise ValueError(f"functional returned {value}")
    return value


def _shifted(g: Oracle, y) -> Oracle:
    y = np.asarray(y, dtype=float)
    return Oracle(lambda X: g.at(X + y), g.dim, label=f"{g.label} shifted")


def _axiom_a(F, family) -> AxiomEntry:
    for k, (_, g) in enumerate(family.linear + tuple((None, p) for p in family.periodic)):
        h = exp_oracle(g, Fraction(1))
        base = _apply(F, h)
        for c in family.units:
            ch = h.derive(lambda X, v, c=c: c * v, kind="complex")
            lhs = _apply(F, ch)
            if abs(lhs - c * base) > AXIOM_A_TOLERANCE * max(1.0, abs(base)):
                return AxiomEntry("a", False, {"member": k, "c": c, "F(ch)": lhs, "cF(h)": c * base})
    return AxiomEntry("a", True)


def _axiom_b(F, family) -> AxiomEntry:
    for c, g in family.linear:
        try:
            _apply(F, exp_oracle(g, Fraction(1)))
        except Exception as exc:  # admissibility is "F accepts it"
            return AxiomEntry("b", False, {"c": list(c), "error": str(exc)})
    return AxiomEntry("b", True)


def _axiom_c(F, family) -> AxiomEntry:
    members = [g for _, g in family.linear] + list(family.periodic)
    for k, g in enumerate(members):
        other = members[(k + 1) % len(members)]
        total = Oracle(lambda X, g=g, o=other: g.at(X) + o.at(X), g.dim, label="sum")
        candidates = [("sum", total)] + [(f"{q}*g", g.derive(lambda X, v, q=q: float(q) * v))
                                         for q in family.rationals]
        for name, h in candidates:
            try:
                _apply(F, exp_oracle(h, Fraction(1)))
            except Exception as exc:
                return AxiomEntry("c", False, {"member": k, "operation": name, "error": str(exc)})
    return AxiomEntry("c", True)


def _axiom_d(F, family) -> AxiomEntry:
    for k, g in enumerate(family.periodic):
        ref = _apply(F, exp_oracle(g, Fraction(1)))
        for y in family.shifts:
            val = _apply(F, exp_oracle(_shifted(g, y), Fraction(1)))
            if abs(val - ref) > AXIOM_D_TOLERANCE:
                return AxiomEntry("d", False, {"member": k, "shift": list(y),
                                               "F(exp(i g_y))": val, "F(exp(i g))": ref})
    return AxiomEntry("d", True)


def _axiom_e(F, family) -> AxiomEntry:
    mass = F.reference_mass()
    members = [g for _, g in family.linear] + list(family.periodic)
    for k, g in enumerate(members):
        if search_alpha(g, F.apply, mass, F.policy) is None:
            return AxiomEntry("e", False, {"member": k, "max_denominator": F.policy.max_denominator})
    return AxiomEntry("e", True)


def check_axioms(F: RegularityFunctional, family: TestFamily | None = None, seed: int = 0) -> AxiomReport:
    family = family or default_family(F.frame, seed)
    entries = []
    for axiom, check in zip("abcde", (_axiom_a, _axiom_b, _axiom_c, _axiom_d, _axiom_e)):
        try:
            entries.append(check(F, family))
        except Exception as exc:
            entries.append(AxiomEntry(axiom, False, {"error": f"{type(exc).__name__}: {exc}"}))
    return AxiomReport(F.label, tuple(entries))


def generic_classify(f: Oracle, F: RegularityFunctional, probes: Sequence) -> LinearityVerdict:
    """The :func:`~additive_lab.estimator.classify` pipeline with ``F`` in place of the integral."""
    return run_pipeline(f, F.frame, F.apply, F.reference_mass(), F.policy, probes)
