# Built-in
import math
import pathlib
import tempfile
import unittest

# PyPI
import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

# Package
from kirchhoff.errors import DimensionMismatch, InvalidDomain
from kirchhoff.grid import (
    DomainSpec,
    GridFunction,
    Kind,
    build_operators,
    continuum_eigenvalue,
    convergence_order,
    dirichlet_energy,
    principal_eigenvalue,
    solve_spd,
)


class TestDomainSpec(unittest.TestCase):
    def test_interval(self):
        spec = DomainSpec.interval(1.0, 3)
        self.assertEqual(spec.kind, Kind.INTERVAL)
        self.assertEqual(spec.widths, (0.25,))
        self.assertEqual(spec.node_count, 3)
        np.testing.assert_allclose(spec.axes()[0], [0.25, 0.5, 0.75])

    def test_rectangle(self):
        spec = DomainSpec.rectangle(1.0, 2.0, 3, 4)
        self.assertEqual(spec.node_count, 12)
        self.assertEqual(spec.measure, 2.0)
        coords = spec.coordinates()
        self.assertEqual(coords.shape, (12, 2))
        # x index major
        np.testing.assert_allclose(coords[:4, 0], 0.25)
        np.testing.assert_allclose(coords[:4, 1], [0.4, 0.8, 1.2, 1.6])

    def test_kind_from_string(self):
        spec = DomainSpec("interval", (2,), (5,))
        self.assertIs(spec.kind, Kind.INTERVAL)

    def test_invalid(self):
        with self.assertRaises(InvalidDomain):
            DomainSpec.interval(1.0, 1)
        with self.assertRaises(InvalidDomain):
            DomainSpec.interval(-1.0, 8)
        with self.assertRaises(InvalidDomain):
            DomainSpec.interval(math.inf, 8)
        with self.assertRaises(InvalidDomain):
            DomainSpec(Kind.RECTANGLE, (1.0,), (8, 8))

    def test_refined_halves_width(self):
        spec = DomainSpec.rectangle(1.0, 1.0, 7, 3)
        fine = spec.refined()
        self.assertEqual(fine.resolution, (15, 7))
        for h, hf in zip(spec.widths, fine.widths):
            self.assertAlmostEqual(hf, h / 2)


class TestGridFunction(unittest.TestCase):
    def test_shape_checked(self):
        spec = DomainSpec.interval(1.0, 4)
        with self.assertRaises(DimensionMismatch):
            GridFunction(np.ones(5), spec)

    def test_sample(self):
        spec = DomainSpec.rectangle(1.0, 1.0, 3)
        g = GridFunction.sample(spec, lambda x, y: x + 10 * y)
        self.assertAlmostEqual(g.values[1], 0.25 + 5.0)

    def test_csv(self):
        spec = DomainSpec.rectangle(1.0, 2.0, 3, 2)
        g = GridFunction.sample(spec, lambda x, y: np.sin(x) * y)
        with tempfile.TemporaryDirectory() as tmp:
            path = pathlib.Path(tmp) / "u.csv"
            g.to_csv(path)
            header = path.read_text().splitlines()[0]
            self.assertEqual(header, "nodeIndex,x,y,value")
            back = GridFunction.from_csv(spec, path)
        np.testing.assert_array_equal(back.values, g.values)


class TestOperators(unittest.TestCase):
    @settings(deadline=None, max_examples=25)
    @given(
        st.integers(min_value=2, max_value=12),
        st.integers(min_value=2, max_value=12),
        st.floats(min_value=0.1, max_value=10),
        st.floats(min_value=0.1, max_value=10),
    )
    def test_symmetric_positive(self, mx, my, a, b):
        spec = DomainSpec.rectangle(a, b, mx, my)
        op = build_operators(spec)
        A = op.stiffness
        self.assertEqual(abs(A - A.T).max(), 0)
        u = np.random.default_rng(mx * 100 + my).standard_normal(mx * my)
        self.assertGreater(u @ (A @ u), 0)
        self.assertTrue(np.all(op.mass > 0))

    def test_energy_of_sine(self):
        spec = DomainSpec.interval(1.0, 255)
        op = build_operators(spec)
        u = GridFunction.sample(spec, lambda x: np.sin(np.pi * x))
        # ∫(π cos πx)² = π²/2
        self.assertAlmostEqual(dirichlet_energy(op, u), np.pi ** 2 / 2, places=3)

    def test_dimension_mismatch(self):
        op = build_operators(DomainSpec.interval(1.0, 8))
        with self.assertRaises(DimensionMismatch):
            op.apply(np.ones(7))


class TestPoisson(unittest.TestCase):
    def test_quadratic_exact(self):
        spec = DomainSpec.interval(1.0, 63)
        op = build_operators(spec)
        u = solve_spd(op, np.ones(spec.node_count))
        (x,) = spec.axes()
        (h,) = spec.widths
        err = np.max(np.abs(u.values - x * (1 - x) / 2))
        self.assertLessEqual(err, 2 * h ** 2)
        self.assertLess(err, 1e-7)

    def test_zero_rhs(self):
        op = build_operators(DomainSpec.interval(1.0, 8))
        u = solve_spd(op, np.zeros(8))
        self.assertFalse(np.any(u.values))

    def test_rectangle_symmetry(self):
        spec = DomainSpec.rectangle(1.0, 1.0, 15)
        op = build_operators(spec)
        u = solve_spd(op, np.ones(spec.node_count)).values.reshape(15, 15)
        np.testing.assert_allclose(u, u.T, rtol=1e-8)
        self.assertTrue(np.all(u > 0))

    def test_energy_order(self):
        # Φ_h = 1/12 − h²/12 for g ≡ 1
        spec = DomainSpec.interval(1.0, 63)
        values = list()
        for s in (spec, spec.refined(), spec.refined().refined()):
            op = build_operators(s)
            u = solve_spd(op, np.ones(s.node_count))
            values.append(dirichlet_energy(op, u))
            (h,) = s.widths
            self.assertAlmostEqual(values[-1], (1 - h * h) / 12, places=8)
        order = convergence_order(values)
        self.assertGreaterEqual(order, 1.9)
        self.assertLessEqual(order, 2.1)

    def test_rectangle_eigenfunction(self):
        # g = 2π² sin πx sin πy has u = sin πx sin πy
        spec = DomainSpec.rectangle(1.0, 1.0, 31)
        op = build_operators(spec)

        def exact(x, y):
            return np.sin(np.pi * x) * np.sin(np.pi * y)

        g = GridFunction.sample(spec, lambda x, y: 2 * np.pi ** 2 * exact(x, y))
        u = solve_spd(op, g)
        err = np.max(np.abs(u.values - GridFunction.sample(spec, exact).values))
        (h, _) = spec.widths
        # Nodal sin·sin is an eigenvector of A with 8/h²·sin²(πh/2)
        lam_h = 8 / h ** 2 * math.sin(math.pi * h / 2) ** 2
        self.assertAlmostEqual(err, abs(2 * math.pi ** 2 / lam_h - 1), delta=1e-6)
        self.assertLessEqual(err, h ** 2)

    @settings(deadline=None, max_examples=30)
    @given(
        st.integers(min_value=0, max_value=2 ** 32 - 1),
        st.integers(min_value=2, max_value=40),
        st.booleans(),
    )
    def test_nonnegative_rhs_positive(self, seed, m, square):
        rng = np.random.default_rng(seed)
        if square:
            m = min(m, 6)
            spec = DomainSpec.rectangle(1.0, 1.0, m)
        else:
            spec = DomainSpec.interval(1.0, m)
        op = build_operators(spec)
        n = spec.node_count
        g = np.zeros(n)
        hot = rng.choice(n, size=rng.integers(1, n + 1), replace=False)
        g[hot] = rng.uniform(0.5, 2.0, size=len(hot))
        u = solve_spd(op, g)
        self.assertTrue(np.all(u.values > 0))

    def test_tolerance_positive(self):
        op = build_operators(DomainSpec.interval(1.0, 8))
        with self.assertRaises(ValueError):
            solve_spd(op, np.ones(8), 0.0)


class TestEigenvalue(unittest.TestCase):
    def test_interval(self):
        spec = DomainSpec.interval(1.0, 255)
        op = build_operators(spec)
        lam, e1 = principal_eigenvalue(op)
        (h,) = spec.widths
        exact = 4 / h ** 2 * math.sin(math.pi * h / 2) ** 2
        self.assertAlmostEqual(lam / exact, 1.0, places=8)
        self.assertLess(abs(lam - math.pi ** 2), 0.005 * math.pi ** 2)
        self.assertTrue(np.all(e1.values > 0))
        self.assertAlmostEqual(float(e1.values @ (op.mass * e1.values)), 1.0)

    def test_square(self):
        spec = DomainSpec.rectangle(1.0, 1.0, 127)
        lam, _ = principal_eigenvalue(build_operators(spec))
        self.assertLess(abs(lam - 2 * math.pi ** 2), 0.01 * 2 * math.pi ** 2)

    def test_refinement_order(self):
        spec = DomainSpec.interval(1.0, 15)
        levels = (spec, spec.refined(), spec.refined().refined())
        self.assertEqual([s.resolution for s in levels], [(15,), (31,), (63,)])
        values = [principal_eigenvalue(build_operators(s))[0] for s in levels]
        order = convergence_order(values)
        self.assertGreaterEqual(order, 1.9)
        self.assertLessEqual(order, 2.1)

    def test_continuum(self):
        spec = DomainSpec.rectangle(1.0, 2.0, 4)
        self.assertAlmostEqual(
            continuum_eigenvalue(spec), math.pi ** 2 * 1.25
        )


class TestConvergenceOrder(unittest.TestCase):
    def test_second_order(self):
        self.assertAlmostEqual(convergence_order([1.0, 0.25, 0.0625]), 2.0)

    def test_needs_three(self):
        with self.assertRaises(ValueError):
            convergence_order([1.0, 0.5])
