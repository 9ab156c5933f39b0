# Built-in
import dataclasses
import math
import unittest

# PyPI
import numpy as np

# Package
from kirchhoff.errors import (
    ExitCode,
    InvalidConfig,
    InvalidNonlinearity,
    NoCrossing,
    SaddleViolation,
)
from kirchhoff.fixpoint import (
    Route,
    Tolerances,
    kirchhoff_residual,
    phi_aux,
    polish_on_ray,
    ray_multiplier,
    saddle_probe,
    solve,
    solve_lambda_bisect,
    solve_t_equation,
)
from kirchhoff.grid import DomainSpec, build_operators, dirichlet_energy
from kirchhoff.kfun import (
    AffineBranch,
    LogBranch,
    SingularPowerBranch,
    TanBranch,
    psi_inverse,
)
from kirchhoff.sublinear import Coefficient, PowerNonlinearity, TableNonlinearity

# Approximate t̃ for f(ξ) = √ξ and α = 1 on (0, 1)
EXPECTED = {
    "tan:1": 0.2368,
    "tan:2": math.pi + 0.1246,
    "tan:3": 2 * math.pi + 0.1055,
    "log": 1.1755,
    "affine:1:0": 0.2405,
}


class FixpointTestCase(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.spec = DomainSpec.interval(1.0, 31)
        cls.op = build_operators(cls.spec)
        cls.coeff = Coefficient.constant(cls.spec)
        cls.f = PowerNonlinearity(0.5)
        cls.branches = [
            TanBranch(1),
            TanBranch(2),
            TanBranch(3),
            LogBranch(),
            AffineBranch(1),
        ]

    def solve_t(self, branch, **kwargs):
        return solve_t_equation(self.op, self.coeff, self.f, branch, **kwargs)

    def solve_lambda(self, branch, **kwargs):
        return solve_lambda_bisect(self.op, self.coeff, self.f, branch, **kwargs)


class TestRoutes(FixpointTestCase):
    def test_t_equation_values(self):
        for branch in self.branches:
            sol = self.solve_t(branch)
            self.assertAlmostEqual(
                sol.t_tilde, EXPECTED[branch.label], delta=1e-3, msg=branch.label
            )
            self.assertIs(sol.route, Route.T_EQUATION)
            self.assertEqual(sol.inner_solves, 1)
            self.assertIsNotNone(sol.phi_unit)

    def test_routes_agree(self):
        for branch in self.branches:
            by_t = self.solve_t(branch)
            by_lam = self.solve_lambda(branch)
            self.assertIs(by_lam.route, Route.LAMBDA_BISECT)
            self.assertLessEqual(
                abs(by_t.t_tilde - by_lam.t_tilde),
                1e-6 * by_t.t_tilde,
                branch.label,
            )
            self.assertAlmostEqual(
                by_t.lam_tilde / by_lam.lam_tilde, 1.0, delta=1e-4
            )

    def test_localization(self):
        for k in (1, 2, 3):
            branch = TanBranch(k)
            sol = self.solve_t(branch)
            lo, hi = branch.interval
            self.assertLess(lo, sol.t_tilde)
            self.assertLess(sol.t_tilde, hi)
            self.assertGreater(sol.boundary_distance, 0)
            self.assertLessEqual(
                abs(psi_inverse(branch, sol.lam_tilde) - sol.t_tilde), 1e-8
            )
            self.assertLessEqual(sol.localization_error, 1e-8)
            self.assertLessEqual(sol.kirchhoff_residual, 1e-8)
            self.assertTrue(np.all(sol.u.values > 0))

    def test_distinct_branches(self):
        t = [self.solve_t(TanBranch(k)).t_tilde for k in (1, 2, 3)]
        self.assertLess(t[0], t[1])
        self.assertLess(t[1], t[2])

    def test_bracket_independence(self):
        for k in (1, 2, 3):
            branch = TanBranch(k)
            lo = (k - 1) * math.pi
            brackets = [
                None,
                (lo + 0.01, lo + 0.02),
                (lo + 0.3, lo + 1.5),
                (lo + 0.001, lo + 1.57),
                (lo + 0.12, lo + 0.13),
            ]
            values = [self.solve_t(branch, bracket=b).t_tilde for b in brackets]
            self.assertLessEqual(max(values) - min(values), 1e-8, branch.label)

    def test_start_independence(self):
        branch = TanBranch(2)
        values = [
            self.solve_lambda(branch, start=s).t_tilde
            for s in (0.01, 0.1, 1.0, 10.0, 100.0)
        ]
        self.assertLessEqual(max(values) - min(values), 1e-8)

    def test_as_dict(self):
        d = self.solve_t(TanBranch(1)).as_dict()
        self.assertEqual(d["route"], "t")
        self.assertEqual(d["branch"]["label"], "tan:1")
        for key in ("tTilde", "lamTilde", "kirchhoffResidual", "boundaryDistance"):
            self.assertIn(key, d)


class TestSteepBranches(FixpointTestCase):
    def test_far_tan_branches(self):
        for k in (10, 100):
            branch = TanBranch(k)
            by_t = self.solve_t(branch)
            by_lam = self.solve_lambda(branch)
            for sol in (by_t, by_lam):
                self.assertTrue(branch.contains(sol.t_tilde), branch.label)
                self.assertLessEqual(sol.kirchhoff_residual, 1e-8, branch.label)
                self.assertLessEqual(
                    sol.localization_error, 1e-8 * sol.t_tilde, branch.label
                )
                self.assertTrue(np.all(sol.u.values > 0))
            self.assertLessEqual(
                abs(by_t.t_tilde - by_lam.t_tilde),
                1e-6 * by_t.t_tilde,
                branch.label,
            )

    def test_ray_multiplier(self):
        sol = self.solve_t(TanBranch(1))
        lam = ray_multiplier(self.op, self.coeff, self.f, sol.u)
        self.assertAlmostEqual(lam / sol.lam_tilde, 1.0, delta=1e-6)

    def test_polish_on_ray(self):
        branch = TanBranch(1)
        sol = self.solve_t(branch)
        off = sol.u.with_values((1 + 1e-6) * sol.u.values)
        before = kirchhoff_residual(
            self.op, self.coeff, self.f, branch, off, dirichlet_energy(self.op, off)
        )
        self.assertGreater(before, 1e-7)
        u, t, residual = polish_on_ray(
            self.op, self.coeff, self.f, branch, off, Tolerances()
        )
        self.assertLessEqual(residual, 1e-8)
        self.assertAlmostEqual(t, dirichlet_energy(self.op, u), delta=1e-15)
        self.assertAlmostEqual(t, sol.t_tilde, delta=1e-7)
        # No steps: the input comes back unchanged
        same, t0, _ = polish_on_ray(
            self.op, self.coeff, self.f, branch, off, Tolerances(), max_steps=0
        )
        self.assertIs(same, off)


class TestDispatch(FixpointTestCase):
    def test_auto(self):
        sol = solve(self.op, self.coeff, self.f, TanBranch(1))
        self.assertIs(sol.route, Route.T_EQUATION)
        sol = solve(self.op, self.coeff, self.f, TanBranch(1), route="lambda")
        self.assertIs(sol.route, Route.LAMBDA_BISECT)

    def test_table_takes_lambda_route(self):
        xi = np.geomspace(1e-8, 1e2, 2000)
        table = TableNonlinearity(xi, np.sqrt(xi))
        sol = solve(self.op, self.coeff, table, TanBranch(1))
        self.assertIs(sol.route, Route.LAMBDA_BISECT)
        reference = self.solve_t(TanBranch(1))
        self.assertAlmostEqual(sol.t_tilde / reference.t_tilde, 1.0, delta=1e-3)

    def test_t_route_needs_power(self):
        table = TableNonlinearity((0, 1), (0, 1))
        with self.assertRaises(InvalidConfig):
            solve(self.op, self.coeff, table, TanBranch(1), route=Route.T_EQUATION)
        with self.assertRaises(InvalidNonlinearity):
            solve_t_equation(self.op, self.coeff, table, TanBranch(1))

    def test_bad_bracket(self):
        with self.assertRaises(InvalidConfig):
            self.solve_t(TanBranch(1), bracket=(0.5, 2.0))
        with self.assertRaises(InvalidConfig):
            self.solve_t(TanBranch(1), bracket=(0.5, 0.25))


class TestNoCrossing(FixpointTestCase):
    def setUp(self):
        # K(t)^4·t >= 2 on I = (0.5, 1), far above Φ(u₁)
        self.branch = SingularPowerBranch(1, 0.5, 0.5)

    def test_t_route(self):
        with self.assertRaises(NoCrossing) as cm:
            self.solve_t(self.branch)
        self.assertEqual(cm.exception.exit_code, ExitCode.NO_CROSSING)
        self.assertEqual(cm.exception.diagnostics["side"], "lower")
        self.assertIn("caveat", cm.exception.diagnostics)

    def test_lambda_route(self):
        with self.assertRaises(NoCrossing) as cm:
            self.solve_lambda(self.branch)
        diagnostics = cm.exception.diagnostics
        self.assertIn("caveat", diagnostics)
        self.assertGreater(diagnostics["gAtLow"], 0)
        self.assertEqual(diagnostics["branch"]["label"], "singular:1:0.5:0.5")


class TestSaddle(FixpointTestCase):
    def test_probe(self):
        sol = self.solve_t(TanBranch(1))
        probe = saddle_probe(sol, self.op, self.coeff, self.f, seed=3)
        self.assertTrue(probe.ok)
        self.assertLessEqual(probe.lam_margin, probe.eps)
        self.assertLessEqual(probe.u_margin, probe.eps)
        self.assertEqual(len(probe.u_samples), 102)
        self.assertEqual(len(probe.lam_samples), 22)
        d = probe.as_dict()
        self.assertEqual(d["seed"], 3)
        self.assertTrue(d["ok"])

    def test_probe_deterministic(self):
        sol = self.solve_t(TanBranch(2))
        a = saddle_probe(sol, self.op, self.coeff, self.f, seed=11)
        b = saddle_probe(sol, self.op, self.coeff, self.f, seed=11)
        np.testing.assert_array_equal(a.phi_u, b.phi_u)

    def test_violation(self):
        sol = self.solve_t(TanBranch(1))
        wrong = dataclasses.replace(sol, u=sol.u.with_values(1.5 * sol.u.values))
        with self.assertRaises(SaddleViolation) as cm:
            saddle_probe(wrong, self.op, self.coeff, self.f)
        self.assertGreater(cm.exception.worst["lambdaMargin"], 0)
        probe = saddle_probe(
            wrong, self.op, self.coeff, self.f, raise_on_violation=False
        )
        self.assertFalse(probe.ok)

    def test_phi_aux(self):
        branch = TanBranch(1)
        u = np.full(31, 0.01)
        with self.assertRaises(ValueError):
            phi_aux(self.op, self.coeff, self.f, branch, u, -1.0)
        value = phi_aux(self.op, self.coeff, self.f, branch, u, 0.0)
        self.assertAlmostEqual(value, -2 * (31 / 32) * 0.01 ** 1.5 / 1.5)


class TestTolerances(unittest.TestCase):
    def test_defaults(self):
        tol = Tolerances()
        self.assertEqual(tol.root, 1e-10)
        self.assertEqual(
            set(tol.as_dict()), {"linear", "frozen", "root", "verify", "residual"}
        )

    def test_positive(self):
        with self.assertRaises(InvalidConfig):
            Tolerances(root=0)
        with self.assertRaises(InvalidConfig):
            Tolerances(linear=-1e-12)

    def test_from_section(self):
        tol = Tolerances.from_section({"root_tol": "1e-9", "other": "x"})
        self.assertEqual(tol.root, 1e-9)
        self.assertEqual(tol.linear, 1e-12)
        with self.assertRaises(InvalidConfig):
            Tolerances.from_section({"frozen_tol": "tight"})
