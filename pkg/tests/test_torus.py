import math
from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import cplx, real
from oracles import additivity_equations, modular_rank, only_zero_homomorphism, rational_nullity
from additive_lab.core import GridSpec, Oracle, constant_oracle
from additive_lab.estimator import Inconclusive
from additive_lab.torus import (
    AdditivityViolation,
    GridSubgroup,
    IncompleteData,
    NonzeroValue,
    TorusPoint,
    TorusWitness,
    Zero,
    haar_shift_defect,
    read_values_csv,
    torsion_vanishing,
    torus_add,
    torus_classify,
    torus_nodes,
    unit_fraction_policy,
)

F = Fraction


def table(q, n, func):
    return {p: float(func(p)) for p in GridSubgroup(q, n).points()}


class TestTorusPoint:
    def test_wraparound(self):
        assert torus_add(TorusPoint([F(1, 2)]), TorusPoint([F(1, 2)])) == TorusPoint([0])

    def test_two_dim(self):
        x = TorusPoint([F(1, 3), F(2, 3)])
        assert torus_add(x, x) == TorusPoint([F(2, 3), F(1, 3)])

    def test_identity(self):
        x = TorusPoint(["5/7", "-1/4"])
        assert x.coords == (F(5, 7), F(3, 4))
        assert torus_add(x, TorusPoint.zero(2)) == x

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            torus_add(TorusPoint([0]), TorusPoint([0, 0]))

    @given(st.lists(st.fractions(), min_size=2, max_size=2), st.lists(st.fractions(), min_size=2, max_size=2))
    def test_coordinates_stay_in_unit_interval(self, a, b):
        s = TorusPoint(a) + TorusPoint(b)
        assert all(0 <= c < 1 for c in s.coords)
        assert s + (-TorusPoint(b)) == TorusPoint(a)

    def test_subgroup(self):
        G = GridSubgroup(4, 2)
        pts = G.points()
        assert G.order == len(pts) == 16
        assert all(torus_add(a, b) in set(pts) for a in pts for b in pts)
        assert [G.index_of(p) for p in pts] == list(range(16))


class TestTorsion:
    def test_zero_table(self):
        assert torsion_vanishing(table(4, 1, lambda p: 0.0), 4) == Zero()

    def test_identity_like(self):
        v = torsion_vanishing(table(2, 1, lambda p: p.coords[0]), 2)
        assert isinstance(v, AdditivityViolation)
        assert v.x == v.y == TorusPoint([F(1, 2)])
        assert v.defect == pytest.approx(-1.0)

    def test_nonzero_origin_reported_first(self):
        v = torsion_vanishing(table(3, 1, lambda p: 0.5), 3)
        assert isinstance(v, AdditivityViolation) and v.x == v.y == TorusPoint([0])

    def test_missing_point(self):
        vals = table(3, 1, lambda p: 0.0)
        del vals[TorusPoint([F(2, 3)])]
        with pytest.raises(IncompleteData, match="2/3"):
            torsion_vanishing(vals, 3)

    def test_csv(self):
        text = "x1,value\n0/1,0\n1/3,0\n2/3,0\n"
        assert torsion_vanishing(read_values_csv(text), 3) == Zero()
        with pytest.raises(ValueError, match="line 2"):
            read_values_csv("x1,value\n1/0,0\n")

    def test_oracle_sanity(self):
        # without wraparound the same constraints admit the linear maps, so the oracles can see a kernel
        q = 5
        pts = list(range(q))
        rows = []
        for x, y in product(pts, pts):
            if x + y < q:
                row = [0] * q
                row[x + y] += 1
                row[x] -= 1
                row[y] -= 1
                rows.append(row)
        assert rational_nullity(rows, q) == 1
        assert modular_rank(rows) == q - 1

    @pytest.mark.parametrize("n", [1, 2])
    def test_exhaustive_homomorphisms(self, n):
        for q in range(1, 13):
            assert only_zero_homomorphism(q, n), (q, n)
            # the unique exact solution is accepted and a unit bump is rejected
            assert torsion_vanishing(table(q, n, lambda p: 0.0), q, n) == Zero()
            if q > 1:
                bump = table(q, n, lambda p: 0.0)
                bump[GridSubgroup(q, n).points()[-1]] = 1.0
                assert isinstance(torsion_vanishing(bump, q, n), AdditivityViolation)

    @settings(max_examples=300)
    @given(st.integers(1, 6), st.integers(1, 2), st.data())
    def test_nonzero_value_unreachable(self, q, n, data):
        size = q ** n
        tiny = st.sampled_from([0.0, 1e-10, -1e-10, 3e-10, -4.9e-10, 5e-10, 1e-9])
        vals = data.draw(st.lists(tiny, min_size=size, max_size=size))
        result = torsion_vanishing(dict(zip(GridSubgroup(q, n).points(), vals)), q, n)
        assert not isinstance(result, NonzeroValue)


class TestHaar:
    def test_exponential_shift(self):
        h = cplx(lambda X: np.exp(2j * np.pi * X[:, 0]), domain="torus")
        assert haar_shift_defect(h, TorusPoint([F(1, 3)]), GridSpec.uniform(1, 4096)) <= 1e-12

    def test_constant(self):
        assert haar_shift_defect(constant_oracle(1.0), TorusPoint([F(2, 9)]), GridSpec.uniform(1, 100)) == 0.0

    @pytest.mark.parametrize("y", [F(1, 4096), F(3, 64), F(1, 2), F(4095, 4096)])
    def test_grid_aligned_bit_exact(self, y):
        h = real(lambda X: np.sin(2 * np.pi * X[:, 0]) + X[:, 0] ** 2, domain="torus")
        assert haar_shift_defect(h, TorusPoint([y]), GridSpec.uniform(1, 4096)) == 0.0

    def test_grid_aligned_bit_exact_2d(self):
        h = real(lambda X: np.exp(X[:, 0]) * np.cos(5 * X[:, 1]), 2, domain="torus")
        assert haar_shift_defect(h, TorusPoint([F(5, 32), F(17, 32)]), GridSpec.uniform(2, 32)) == 0.0

    def test_nodes_are_permuted(self):
        grid = GridSpec.uniform(1, 64)
        base = np.sort(torus_nodes(grid)[:, 0])
        shifted = np.sort(torus_nodes(grid, TorusPoint([F(7, 64)]))[:, 0])
        assert np.array_equal(base, shifted)

    def test_broken_periodic_extension(self):
        # e^{2 pi i x} on [0,1) and 0 elsewhere, asked for the unreduced lift x + y
        h = cplx(lambda X: np.where((X[:, 0] >= 0) & (X[:, 0] < 1), np.exp(2j * np.pi * X[:, 0]), 0))
        d = haar_shift_defect(h, TorusPoint([F(1, 2)]), GridSpec.uniform(1, 4096))
        # int_0^{1/2} e^{2 pi i (x + 1/2)} dx = 1/pi in modulus
        assert d == pytest.approx(1 / math.pi, abs=1e-6) and d > 0.1


class TestTorusClassify:
    PROBES = [TorusPoint([F(k, 8)]) for k in range(8)]

    def test_zero(self):
        assert torus_classify(constant_oracle(0.0), self.PROBES, GridSpec.uniform(1, 256)) == Zero()

    def test_fractional_lift(self):
        v = torus_classify(real(lambda X: X[:, 0], domain="torus"), self.PROBES, GridSpec.uniform(1, 256))
        assert isinstance(v, TorusWitness) and v.reason == "phase"
        assert abs(v.phase - 1) > 1e-6

    def test_constant_two_pi(self):
        v = torus_classify(constant_oracle(2 * math.pi), [TorusPoint([F(1, 2)])], GridSpec.uniform(1, 256))
        assert isinstance(v, TorusWitness) and v.reason == "not_additive"
        assert v.point == TorusPoint([F(1, 14)])

    def test_lattice_refutation(self):
        # 14 pi x: alpha = 1/3 is the first unit fraction with a large integral, and 3/7 lands on 2 pi
        f = real(lambda X: 14 * np.pi * X[:, 0], domain="torus")
        v = torus_classify(f, [TorusPoint([F(3, 7)])], GridSpec.uniform(1, 4096))
        assert isinstance(v, TorusWitness) and v.reason == "lattice"
        assert v.alpha == F(1, 3) and v.point == TorusPoint([F(3, 49)])
        assert v.phase == pytest.approx(np.exp(2j * np.pi / 7), abs=1e-9)

    def test_no_alpha_is_inconclusive(self):
        f = real(lambda X: 2 * np.pi * X[:, 0], domain="torus")
        v = torus_classify(f, self.PROBES, GridSpec.uniform(1, 256), policy=unit_fraction_policy(1))
        assert isinstance(v, Inconclusive) and v.reason == "no nonvanishing alpha"

    def test_two_dim_zero(self):
        probes = GridSubgroup(3, 2).points()
        assert torus_classify(constant_oracle(0.0, 2), probes, GridSpec.uniform(2, 16)) == Zero()
