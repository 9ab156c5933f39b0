# Built-in
import unittest

# PyPI
import numpy as np

# Package
from kirchhoff.errors import (
    DegenerateLimit,
    DimensionMismatch,
    InvalidCoefficient,
    InvalidConfig,
    InvalidNonlinearity,
)
from kirchhoff.grid import DomainSpec, build_operators, dirichlet_energy
from kirchhoff.sublinear import (
    Coefficient,
    PowerNonlinearity,
    TableNonlinearity,
    coefficient_from_mapping,
    frozen_energy,
    frozen_residual,
    functional_j,
    j_increases_along,
    nonlinearity_from_mapping,
    scale_solution,
    solve_frozen,
    supersolution,
    validate_nonlinearity,
)


def _interval(m=31):
    spec = DomainSpec.interval(1.0, m)
    return spec, build_operators(spec), Coefficient.constant(spec)


class TestNonlinearity(unittest.TestCase):
    def test_power(self):
        f = PowerNonlinearity(0.5)
        np.testing.assert_allclose(f([-1.0, 0.0, 4.0]), [0.0, 0.0, 2.0])
        self.assertAlmostEqual(float(f.primitive(4.0)), 8 / 1.5)
        self.assertEqual(f.label, "power:0.5")

    def test_power_exponent(self):
        for q in (0.0, 1.0, -0.5, 2.0):
            with self.assertRaises(InvalidNonlinearity):
                PowerNonlinearity(q)

    def test_table_prepends_zero(self):
        f = TableNonlinearity((1, 2), (1, 1.5))
        self.assertEqual(f.xi, (0.0, 1.0, 2.0))
        self.assertEqual(f.values, (0.0, 1.0, 1.5))

    def test_table_primitive(self):
        f = TableNonlinearity((0, 5, 10), (0, 5, 10))
        self.assertAlmostEqual(float(f.primitive(4.0)), 8.0)
        self.assertAlmostEqual(float(f.primitive(10.0)), 50.0)
        # f is held at 10 beyond the table
        self.assertAlmostEqual(float(f.primitive(12.0)), 70.0)
        self.assertAlmostEqual(float(f(12.0)), 10.0)
        self.assertEqual(float(f.primitive(-1.0)), 0.0)

    def test_table_primitive_column(self):
        f = TableNonlinearity((0, 1, 2), (0, 1, 2), (0, 0.5, 2))
        self.assertAlmostEqual(float(f.primitive(2.0)), 2.0)
        self.assertAlmostEqual(float(f.primitive(3.0)), 4.0)

    def test_table_invalid(self):
        with self.assertRaises(InvalidNonlinearity):
            TableNonlinearity((0, 1), (0, 1, 2))
        with self.assertRaises(InvalidNonlinearity):
            TableNonlinearity((0, 2, 1), (0, 1, 2))
        with self.assertRaises(InvalidNonlinearity):
            TableNonlinearity((0, 1), (0, np.inf))

    def test_from_mapping(self):
        self.assertEqual(
            nonlinearity_from_mapping({"family": "power", "q": "0.25"}),
            PowerNonlinearity(0.25),
        )
        with self.assertRaises(InvalidConfig):
            nonlinearity_from_mapping({"family": "power", "q": "half"})
        with self.assertRaises(InvalidNonlinearity):
            nonlinearity_from_mapping({"family": "power", "q": "1.5"})
        with self.assertRaises(InvalidConfig):
            nonlinearity_from_mapping({"family": "cubic"})
        with self.assertRaises(InvalidConfig):
            nonlinearity_from_mapping(
                {"family": "table", "path": "/nonexistent/f.csv"}
            )


class TestValidateNonlinearity(unittest.TestCase):
    def test_power(self):
        for q in (0.1, 0.5, 0.9):
            report = validate_nonlinearity(PowerNonlinearity(q))
            self.assertTrue(report.ok, q)
            self.assertTrue(report.as_dict()["ok"])

    def test_linear_table(self):
        report = validate_nonlinearity(
            TableNonlinearity((0, 1, 10, 100), (0, 1, 10, 100))
        )
        self.assertFalse(report.quotient_decreasing)
        self.assertFalse(report.zero_blowup)
        self.assertFalse(report.ok)

    def test_bounded_quotient_at_zero(self):
        xi = np.geomspace(1e-6, 1e6, 200)
        report = validate_nonlinearity(TableNonlinearity(xi, xi / (1 + xi)))
        self.assertTrue(report.quotient_decreasing)
        self.assertTrue(report.nondecreasing)
        self.assertFalse(report.zero_blowup)
        self.assertFalse(report.ok)

    def test_sqrt_table(self):
        xi = np.geomspace(1e-8, 1e8, 400)
        report = validate_nonlinearity(TableNonlinearity(xi, np.sqrt(xi)))
        self.assertTrue(report.ok)

    def test_decreasing_table(self):
        report = validate_nonlinearity(TableNonlinearity((0, 1, 2), (0, 2, 1)))
        self.assertFalse(report.nondecreasing)

    def test_grid_points(self):
        with self.assertRaises(ValueError):
            validate_nonlinearity(PowerNonlinearity(0.5), grid_points=4)


class TestCoefficient(unittest.TestCase):
    def test_constant(self):
        spec = DomainSpec.interval(1.0, 63)
        coeff = Coefficient.constant(spec)
        self.assertEqual(coeff.label, "constant:1")
        self.assertAlmostEqual(coeff.integral, 63 / 64)
        self.assertEqual(coeff.ess_sup, 1.0)

    def test_positive(self):
        spec = DomainSpec.interval(1.0, 7)
        with self.assertRaises(InvalidCoefficient):
            Coefficient.constant(spec, 0.0)
        with self.assertRaises(InvalidCoefficient):
            Coefficient.ramp(spec, slope=-2.0, base=1.0)

    def test_ramp(self):
        spec = DomainSpec.interval(1.0, 3)
        coeff = Coefficient.ramp(spec, slope=2.0, base=1.0)
        np.testing.assert_allclose(coeff.values, [1.5, 2.0, 2.5])
        self.assertEqual(coeff.ess_sup, 2.5)

    def test_checkerboard(self):
        spec = DomainSpec.rectangle(1.0, 1.0, 4)
        coeff = Coefficient.checkerboard(spec, 1.0, 3.0, cells=2)
        board = coeff.values.reshape(4, 4)
        np.testing.assert_array_equal(board[:2, :2], 1.0)
        np.testing.assert_array_equal(board[2:, :2], 3.0)
        np.testing.assert_array_equal(board[2:, 2:], 1.0)

    def test_from_mapping(self):
        spec = DomainSpec.interval(1.0, 7)
        coeff = coefficient_from_mapping(spec, {"kind": "constant", "value": "2"})
        self.assertEqual(coeff.ess_sup, 2.0)
        with self.assertRaises(InvalidConfig):
            coefficient_from_mapping(spec, {"kind": "ramp", "slope": "steep"})
        with self.assertRaises(InvalidConfig):
            coefficient_from_mapping(spec, {"kind": "gaussian"})
        with self.assertRaises(InvalidConfig):
            coefficient_from_mapping(
                spec, {"kind": "csv", "path": "/nonexistent/alpha.csv"}
            )

    def test_grid_mismatch(self):
        spec, op, _ = _interval(31)
        coeff = Coefficient.constant(DomainSpec.interval(1.0, 15))
        with self.assertRaises(DimensionMismatch):
            functional_j(op, coeff, PowerNonlinearity(0.5), np.ones(31))


class TestFunctionals(unittest.TestCase):
    def test_functional_j(self):
        spec, op, coeff = _interval(63)
        value = functional_j(op, coeff, PowerNonlinearity(0.5), np.ones(63))
        self.assertAlmostEqual(value, 2 * (63 / 64) / 1.5)

    def test_negative_part_ignored(self):
        spec, op, coeff = _interval(15)
        f = PowerNonlinearity(0.5)
        self.assertEqual(functional_j(op, coeff, f, -np.ones(15)), 0.0)

    def test_frozen_energy_needs_positive_lambda(self):
        spec, op, coeff = _interval(15)
        with self.assertRaises(ValueError):
            frozen_energy(op, coeff, PowerNonlinearity(0.5), 0.0, np.ones(15))

    def test_j_increases(self):
        spec, op, coeff = _interval(15)
        u = np.sin(np.pi * spec.axes()[0])
        self.assertTrue(j_increases_along(op, coeff, PowerNonlinearity(0.5), u))


class TestSupersolution(unittest.TestCase):
    def test_power(self):
        spec, op, coeff = _interval(31)
        f = PowerNonlinearity(0.5)
        for lam in (0.1, 1.0, 10.0):
            ubar = supersolution(op, coeff, f, lam).values
            excess = lam * op.apply(ubar) - op.mass * coeff.values * f(ubar)
            scale = np.max(np.abs(lam * op.apply(ubar)))
            self.assertGreaterEqual(np.min(excess), -1e-8 * scale)
            self.assertTrue(np.all(ubar > 0))

    def test_table(self):
        spec, op, coeff = _interval(31)
        xi = np.geomspace(1e-6, 1e6, 200)
        f = TableNonlinearity(xi, np.sqrt(xi))
        ubar = supersolution(op, coeff, f, 1.0).values
        excess = op.apply(ubar) - op.mass * coeff.values * f(ubar)
        self.assertGreaterEqual(np.min(excess), -1e-8 * np.max(op.apply(ubar)))


class TestSolveFrozen(unittest.TestCase):
    def test_solution(self):
        spec, op, coeff = _interval(31)
        f = PowerNonlinearity(0.5)
        sol = solve_frozen(op, coeff, f, 1.0)
        self.assertTrue(np.all(sol.u.values > 0))
        self.assertLessEqual(sol.residual, 1e-8)
        self.assertLessEqual(frozen_residual(op, coeff, f, 1.0, sol.u), 1e-8)
        self.assertAlmostEqual(sol.phi, dirichlet_energy(op, sol.u))
        self.assertLess(sol.energy, 0)
        self.assertGreater(sol.iterations, 0)

    def test_unique_from_any_supersolution(self):
        spec, op, coeff = _interval(31)
        f = PowerNonlinearity(0.5)
        solutions = [
            solve_frozen(op, coeff, f, 2.0, scale=s).u.values for s in (1, 3, 10)
        ]
        norm = np.max(solutions[0])
        for other in solutions[1:]:
            self.assertLessEqual(np.max(np.abs(other - solutions[0])), 1e-8 * norm)

    def test_scaling_law(self):
        spec, op, coeff = _interval(31)
        for q in (0.25, 0.5, 0.75):
            f = PowerNonlinearity(q)
            base = solve_frozen(op, coeff, f, 1.0)
            direct = solve_frozen(op, coeff, f, 3.0)
            scaled = scale_solution(op, coeff, f, base, 3.0)
            norm = np.max(direct.u.values)
            np.testing.assert_allclose(
                scaled.u.values, direct.u.values, rtol=0, atol=1e-6 * norm
            )
            self.assertAlmostEqual(scaled.phi / direct.phi, 1.0, delta=1e-6)
            self.assertLessEqual(scaled.residual, 1e-6)

    def test_energy_decreases_in_lambda(self):
        spec, op, coeff = _interval(31)
        f = PowerNonlinearity(0.5)
        lams = (0.5, 1.0, 2.0, 4.0)
        phis = [solve_frozen(op, coeff, f, lam).phi for lam in lams]
        self.assertTrue(all(a > b > 0 for a, b in zip(phis, phis[1:])))
        # Φ(u_λ) = λ^(-2/(1-q))·Φ(u_1), a factor 16 per doubling for q = 1/2
        for a, b in zip(phis, phis[1:]):
            self.assertAlmostEqual(a / b, 16.0, delta=1e-5)
        self.assertAlmostEqual(phis[1], 8.06e-4, delta=1e-6)

    def test_scaling_needs_power(self):
        spec, op, coeff = _interval(15)
        base = solve_frozen(op, coeff, PowerNonlinearity(0.5), 1.0)
        table = TableNonlinearity((0, 1), (0, 1))
        with self.assertRaises(InvalidNonlinearity):
            scale_solution(op, coeff, table, base, 2.0)

    def test_monotone_iterates(self):
        spec, op, coeff = _interval(31)
        iterates = list()
        solve_frozen(
            op,
            coeff,
            PowerNonlinearity(0.5),
            1.0,
            scale=4.0,
            callback=lambda k, u: iterates.append(u.values.copy()),
        )
        self.assertGreater(len(iterates), 2)
        for old, new in zip(iterates, iterates[1:]):
            self.assertTrue(np.all(new <= old + 1e-7 * np.max(old)))

    def test_warm_start(self):
        spec, op, coeff = _interval(31)
        f = PowerNonlinearity(0.5)
        first = solve_frozen(op, coeff, f, 1.0)
        # u_1 is a supersolution for every λ > 1
        second = solve_frozen(op, coeff, f, 2.0, start=first.u)
        reference = solve_frozen(op, coeff, f, 2.0)
        np.testing.assert_allclose(
            second.u.values,
            reference.u.values,
            atol=1e-8 * np.max(reference.u.values),
        )

    def test_degenerate(self):
        spec, op, coeff = _interval(15)
        zero = TableNonlinearity((0, 1), (0, 0))
        with self.assertRaises(DegenerateLimit):
            solve_frozen(op, coeff, zero, 1.0)

    def test_arguments(self):
        spec, op, coeff = _interval(15)
        f = PowerNonlinearity(0.5)
        with self.assertRaises(ValueError):
            solve_frozen(op, coeff, f, 0.0)
        with self.assertRaises(ValueError):
            solve_frozen(op, coeff, f, 1.0, scale=0.5)
        with self.assertRaises(ValueError):
            solve_frozen(op, coeff, f, 1.0, tol=0.0)
