"""Numerical linearity tests for additive functions.

The pipeline (see :func:`classify`): fit ``c`` from the generator values,
subtract ``c . x``, find a rational ``alpha`` whose exponential integral
``int_I exp(i alpha g)`` is not small, then check that ``exp(i alpha g(y)) = 1``
at the probes. Probes sitting on a nonzero multiple of ``2 pi`` are pushed to
``y / (7 k)``; an additive residual must then show phase ``exp(2 pi i / 7)``.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .core import (
    DegenerateDomain,
    ExactPoint,
    GridSpec,
    Oracle,
    OracleFailure,
    Parallelepiped,
    constant_oracle,
    midpoint_quadrature,
    scale_point,
)

PHASE_TOLERANCE = 1e-6
LATTICE_TOLERANCE = 1e-6
ADDITIVITY_SPOT_TOLERANCE = 1e-8
REFUTATION_DIVISOR = 7
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class AlphaSearchPolicy:
    """Finite Farey-ordered list of candidate ``alpha`` in ``(0, 1]``.

    ``unit_fractions`` restricts the list to ``1/1, 1/2, ..., 1/D``.
    """

    max_denominator: int = 32
    threshold: float = 0.1
    unit_fractions: bool = False

    def __post_init__(self):
        if self.max_denominator < 1:
            raise ValueError("max_denominator must be >= 1")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie in (0, 1)")

    def candidates(self) -> list[Fraction]:
        out = []
        for den in range(1, self.max_denominator + 1):
            if self.unit_fractions:
                out.append(Fraction(1, den))
                continue
            out.extend(Fraction(num, den) for num in range(1, den + 1) if math.gcd(num, den) == 1)
        return out


# -- verdicts ----------------------------------------------------------------

@dataclass(frozen=True)
class Linear:
    c: tuple
    diagnostics: dict = field(default_factory=dict, compare=False)

    kind = "linear"


@dataclass(frozen=True)
class NonlinearWitness:
    point: object
    alpha: Fraction
    phase: complex
    residual: float
    diagnostics: dict = field(default_factory=dict, compare=False)

    kind = "nonlinear"

    def __post_init__(self):
        if not abs(self.phase - 1) > PHASE_TOLERANCE:
            raise ValueError(f"witness phase {self.phase} is within tolerance of 1")


@dataclass(frozen=True)
class Inconclusive:
    reason: str
    diagnostics: dict = field(default_factory=dict, compare=False)

    kind = "inconclusive"


LinearityVerdict = Linear | NonlinearWitness | Inconclusive


def same_verdict(a: LinearityVerdict, b: LinearityVerdict) -> bool:
    """Verdict equality ignoring diagnostics (points compared by value)."""
    if type(a) is not type(b):
        return False
    if isinstance(a, Linear):
        return a.c == b.c
    if isinstance(a, Inconclusive):
        return a.reason == b.reason
    pa, pb = a.point, b.point
    same_point = pa == pb if isinstance(pa, ExactPoint) else np.array_equal(np.asarray(pa), np.asarray(pb))
    return same_point and a.alpha == b.alpha and a.phase == b.phase and a.residual == b.residual


# -- coefficient and residual ------------------------------------------------

def coefficient_from_generators(f: Oracle, I: Parallelepiped) -> np.ndarray:
    """Solve ``c . u_k = f(u_k)``; ``f`` is evaluated at the generators themselves."""
    U = I.generator_matrix()
    if abs(np.linalg.det(U)) <= 1e-12 and not I.is_exact:
        raise DegenerateDomain("singular generator matrix")
    if I.is_exact and f.exact:
        rhs = np.asarray(f.at_exact(I.exact_generators), dtype=float)
    else:
        rhs = np.asarray(f.at(U), dtype=float)
    if not np.all(np.isfinite(rhs)):
        raise OracleFailure(f"non-finite value at a generator: {rhs!r}")
    c = np.linalg.solve(U, rhs)
    scale = max(1.0, float(np.max(np.abs(rhs))))
    if np.max(np.abs(U @ c - rhs)) > 1e-10 * scale:
        raise DegenerateDomain("generator system is ill-conditioned (residual above 1e-10)")
    return c


def residual_oracle(f: Oracle, c: Sequence[float]) -> Oracle:
    """``g(x) = f(x) - c . x``."""
    c = np.asarray(c, dtype=float).reshape(f.dim)
    if not np.any(c):
        return f
    return f.derive(lambda X, v: v - X @ c, label=f"{f.label} - c.x")


def exp_oracle(g: Oracle, alpha: Fraction) -> Oracle:
    a = float(alpha)
    return g.derive(lambda X, v: np.exp(1j * a * v), kind="complex")


# -- integral identities -----------------------------------------------------

def shift_invariance_defect(u: Oracle, I: Parallelepiped, y, grid: GridSpec) -> float:
    return abs(midpoint_quadrature(u, I, grid, y) - midpoint_quadrature(u, I, grid))


def mean_value_estimate(g: Oracle, I: Parallelepiped, y, grid: GridSpec) -> float:
    """``[Q(g, y) - Q(g, 0)] / vol(I)``; equals ``g(y)`` for additive ``g``."""
    diff = midpoint_quadrature(g, I, grid, y) - midpoint_quadrature(g, I, grid)
    return float(np.real(diff)) / I.volume()


def exp_integral(g: Oracle, I: Parallelepiped, alpha: Fraction, grid: GridSpec) -> complex:
    return complex(midpoint_quadrature(exp_oracle(g, alpha), I, grid))


def search_alpha(g: Oracle, integrate: Callable[[Oracle], complex], mass: float,
                 policy: AlphaSearchPolicy) -> tuple[Fraction, complex] | None:
    """First candidate with ``|integrate(exp(i alpha g))| >= tau * mass`` (and nonzero)."""
    need = policy.threshold * mass
    for alpha in policy.candidates():
        value = complex(integrate(exp_oracle(g, alpha)))
        if abs(value) > 0 and abs(value) >= need:
            return alpha, value
    return None


def find_alpha(g: Oracle, I: Parallelepiped, policy: AlphaSearchPolicy, grid: GridSpec):
    """Returns ``(alpha, value)`` or ``None`` when no candidate qualifies."""
    return search_alpha(g, lambda h: midpoint_quadrature(h, I, grid), I.volume(), policy)


# -- phase and lattice tests -------------------------------------------------

@dataclass(frozen=True)
class PhaseTest:
    phases: np.ndarray
    values: np.ndarray
    passed: bool
    worst: int | None  # index of the largest |phase - 1| when failed
    first: int | None  # index of the first failing point


def phase_test(g: Oracle, alpha: Fraction, points: Sequence, tolerance: float = PHASE_TOLERANCE) -> PhaseTest:
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    values = np.asarray(g.values(points), dtype=float)
    if not np.all(np.isfinite(values)):
        j = int(np.argmax(~np.isfinite(values)))
        raise OracleFailure(f"oracle returned {values[j]} at probe {points[j]!r}", node=points[j])
    phases = np.exp(1j * float(alpha) * values)
    dev = np.abs(phases - 1)
    fails = dev > tolerance
    if not fails.any():
        return PhaseTest(phases, values, True, None, None)
    return PhaseTest(phases, values, False, int(np.argmax(dev)), int(np.argmax(fails)))


class LatticeOutcome(enum.Enum):
    REFUTED = "refuted"
    NOT_ADDITIVE_AT_PROBE = "not_additive_at_probe"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class LatticeRefutation:
    outcome: LatticeOutcome
    point: object
    phase: complex
    value: float


def lattice_index(alpha: Fraction, value: float, tolerance: float = LATTICE_TOLERANCE) -> int:
    """``k`` with ``|alpha*value - 2 pi k| <= tol``; 0 when no lattice point is that close."""
    t = float(alpha) * value
    k = round(t / TWO_PI)
    return k if abs(t - TWO_PI * k) <= tolerance else 0


def lattice_refutation(g: Oracle, alpha: Fraction, y0, k0: int,
                       tolerance: float = PHASE_TOLERANCE) -> LatticeRefutation:
    """Probe ``y0 / (7 k0)``: additive ``g`` must give phase ``exp(2 pi i / 7)`` there."""
    if k0 == 0:
        raise ValueError("lattice refutation needs a nonzero lattice index")
    probe = scale_point(y0, Fraction(1, REFUTATION_DIVISOR * k0))
    value = float(np.real(g(probe)))
    if not math.isfinite(value):
        raise OracleFailure(f"oracle returned {value} at probe {probe!r}", node=probe)
    phase = cmath.exp(1j * float(alpha) * value)
    if abs(phase - cmath.exp(1j * TWO_PI / REFUTATION_DIVISOR)) <= tolerance:
        outcome = LatticeOutcome.REFUTED
    elif abs(phase - 1) <= tolerance:
        outcome = LatticeOutcome.NOT_ADDITIVE_AT_PROBE
    else:
        outcome = LatticeOutcome.INCONCLUSIVE
    return LatticeRefutation(outcome, probe, phase, value)


# -- pipeline ----------------------------------------------------------------

def _add_points(a, b):
    if isinstance(a, ExactPoint):
        return a + b
    if hasattr(a, "to_floats"):
        return a + b
    return np.asarray(a, dtype=float) + np.asarray(b, dtype=float)


def additivity_spot_check(f: Oracle, probes: Sequence, tolerance: float = ADDITIVITY_SPOT_TOLERANCE) -> dict:
    """``|f(x+y) - f(x) - f(y)|`` over consecutive probe pairs (diagnostic only)."""
    probes = list(probes)
    if len(probes) < 2:
        return {"pairs": 0, "max_defect": 0.0, "passed": True}
    sums = [_add_points(probes[k], probes[k + 1]) for k in range(len(probes) - 1)]
    fx = np.real(f.values(probes))
    fs = np.real(f.values(sums))
    defects = np.abs(fs - fx[:-1] - fx[1:])
    scale = np.maximum(1.0, np.abs(fx[:-1]) + np.abs(fx[1:]))
    worst = float(np.max(defects))
    return {"pairs": len(sums), "max_defect": worst, "passed": bool(np.all(defects <= tolerance * scale))}


def run_pipeline(f: Oracle, frame: Parallelepiped, integrate: Callable[[Oracle], complex], mass: float,
                 policy: AlphaSearchPolicy, probes: Sequence, coefficient=None) -> LinearityVerdict:
    """Shared engine behind :func:`classify` and the framework/torus variants.

    ``integrate`` is the functional applied to ``exp(i alpha g)``; ``mass`` is
    its value on the constant 1. ``coefficient`` overrides the linear fit.
    """
    probes = list(probes)
    if not probes:
        raise ValueError("classification needs at least one probe")
    diagnostics: dict = {}
    try:
        diagnostics["additivity"] = additivity_spot_check(f, probes)
    except (OracleFailure, ValueError) as exc:
        diagnostics["additivity"] = {"error": str(exc)}
    try:
        if coefficient is None:
            c = coefficient_from_generators(f, frame)
        else:
            c = np.asarray(coefficient, dtype=float).reshape(f.dim)
        diagnostics["c"] = c.tolist()
        g = residual_oracle(f, c)
        found = search_alpha(g, integrate, mass, policy)
        if found is None:
            return Inconclusive("no nonvanishing alpha", diagnostics)
        alpha, value = found
        diagnostics["alpha"] = alpha
        diagnostics["exp_integral"] = value
        pt = phase_test(g, alpha, probes)
        if not pt.passed:
            w = pt.first
            return NonlinearWitness(probes[w], alpha, complex(pt.phases[w]), float(pt.values[w]), diagnostics)
        for probe, val in zip(probes, pt.values):
            k0 = lattice_index(alpha, float(val))
            if k0 == 0:
                continue
            ref = lattice_refutation(g, alpha, probe, k0)
            diagnostics["lattice"] = {"probe": probe, "k0": k0, "outcome": ref.outcome.value,
                                      "point": ref.point, "phase": ref.phase, "value": ref.value}
            if ref.outcome is LatticeOutcome.REFUTED:
                return NonlinearWitness(ref.point, alpha, ref.phase, ref.value, diagnostics)
            if ref.outcome is LatticeOutcome.NOT_ADDITIVE_AT_PROBE:
                return Inconclusive("additivity fails at lattice probe", diagnostics)
            return Inconclusive("lattice probe phase matches neither exp(2 pi i/7) nor 1", diagnostics)
        return Linear(tuple(float(x) for x in c), diagnostics)
    except (OracleFailure, DegenerateDomain) as exc:
        diagnostics["error"] = f"{type(exc).__name__}: {exc}"
        return Inconclusive(str(exc), diagnostics)


def classify(f: Oracle, I: Parallelepiped, probes: Sequence, grid: GridSpec | None = None,
             policy: AlphaSearchPolicy | None = None) -> LinearityVerdict:
    """Decide ``f = c . x`` versus a nonlinearity witness, using ``I`` as the frame."""
    grid = grid or GridSpec.default(I.dim)
    policy = policy or AlphaSearchPolicy()
    return run_pipeline(f, I, lambda h: midpoint_quadrature(h, I, grid), I.volume(), policy, probes)


@dataclass(frozen=True)
class ComponentVerdict:
    index: int  # 0-based component index
    verdict: LinearityVerdict


def classify_vector_valued(components: Sequence[Oracle], I: Parallelepiped, probes: Sequence,
                           grid: GridSpec | None = None,
                           policy: AlphaSearchPolicy | None = None) -> np.ndarray | ComponentVerdict:
    """Matrix ``A`` (rows = components) if every component is linear.

    Otherwise the first nonlinear component's verdict, or, when none is
    nonlinear, the first inconclusive one.
    """
    verdicts = [classify(fk, I, probes, grid, policy) for fk in components]
    for k, v in enumerate(verdicts):
        if isinstance(v, NonlinearWitness):
            return ComponentVerdict(k, v)
    for k, v in enumerate(verdicts):
        if isinstance(v, Inconclusive):
            return ComponentVerdict(k, v)
    return np.array([v.c for v in verdicts], dtype=float)


def linear_oracle(c: Sequence[float]) -> Oracle:
    c = np.asarray(c, dtype=float)
    return Oracle(lambda X: X @ c, len(c), label=f"linear {c.tolist()}")


__all__ = [
    "AlphaSearchPolicy", "ComponentVerdict", "Inconclusive", "LatticeOutcome", "LatticeRefutation",
    "Linear", "LinearityVerdict", "NonlinearWitness", "PhaseTest", "classify", "classify_vector_valued",
    "coefficient_from_generators", "constant_oracle", "exp_integral", "find_alpha", "lattice_index",
    "lattice_refutation", "linear_oracle", "mean_value_estimate", "phase_test", "residual_oracle",
    "run_pipeline", "search_alpha", "shift_invariance_defect", "same_verdict",
]
