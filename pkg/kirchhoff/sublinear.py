"""The frozen problem −Δu = (1/λ)·α·f(u) with a sublinear f

Its unique positive solution u_λ is the global minimizer of λΦ − J
with Φ(u) = ∫|∇u|² and J(u) = 2∫αF(u⁺). Solutions are computed by
monotone iteration from a supersolution.
"""

# Built-in
import abc
import dataclasses
import logging
import math
import pathlib
import typing

# PyPI
import numpy as np

# Package
from kirchhoff.errors import (
    DegenerateLimit,
    DimensionMismatch,
    InvalidCoefficient,
    InvalidConfig,
    InvalidNonlinearity,
    NoConvergence,
)
from kirchhoff.grid import (
    DiscreteLaplacian,
    DomainSpec,
    GridFunction,
    dirichlet_energy,
    solve_spd,
)

log = logging.getLogger(__name__)

FROZEN_TOL = 1e-10
RESIDUAL_TOL = 1e-8
INNER_TOL = 1e-12
MAX_ITERATIONS = 10_000
POSITIVITY_FLOOR = 1e-14
MAX_DOUBLINGS = 200
TREND_SLOPE = -0.01


# Nonlinearities
# --------------


class Nonlinearity(abc.ABC):
    """f on [0, +inf), extended by f(ξ) = 0 for ξ < 0"""

    family: typing.ClassVar[str] = ""

    @abc.abstractmethod
    def f(self, xi) -> np.ndarray:
        pass

    @abc.abstractmethod
    def primitive(self, xi) -> np.ndarray:
        """F(ξ) = ∫₀^ξ f"""

    @abc.abstractmethod
    def validation_grid(self, points: int) -> np.ndarray:
        pass

    @property
    @abc.abstractmethod
    def label(self) -> str:
        pass

    def __call__(self, xi):
        return self.f(xi)


@dataclasses.dataclass(frozen=True)
class PowerNonlinearity(Nonlinearity):
    """f(ξ) = ξ^q with 0 < q < 1"""

    q: float
    family: typing.ClassVar[str] = "power"

    def __post_init__(self):
        if not 0 < self.q < 1:
            raise InvalidNonlinearity(f"Power q must be in (0, 1): {self.q!r}")

    def f(self, xi):
        xi = np.asarray(xi, float)
        return np.where(xi > 0, np.abs(xi) ** self.q, 0.0)

    def primitive(self, xi):
        xi = np.asarray(xi, float)
        p = self.q + 1
        return np.where(xi > 0, np.abs(xi) ** p / p, 0.0)

    def validation_grid(self, points):
        return np.geomspace(1e-12, 1e12, points)

    @property
    def label(self):
        return f"power:{self.q:g}"


@dataclasses.dataclass(frozen=True)
class TableNonlinearity(Nonlinearity):
    """f sampled on [0, ξmax], linearly interpolated.

    Beyond ξmax f is held constant. Without a primitive column F is
    the exact integral of the interpolant, which is the composite
    trapezoid rule at the table nodes.
    """

    xi: typing.Tuple[float, ...]
    values: typing.Tuple[float, ...]
    primitive_values: typing.Optional[typing.Tuple[float, ...]] = None
    source: str = "custom"
    family: typing.ClassVar[str] = "table"

    def __post_init__(self):
        xi = [float(x) for x in self.xi]
        values = [float(x) for x in self.values]
        prim = self.primitive_values
        prim = None if prim is None else [float(x) for x in prim]
        if len(xi) != len(values) or len(xi) < 2:
            raise InvalidNonlinearity("Table needs two columns of equal length")
        if prim is not None and len(prim) != len(xi):
            raise InvalidNonlinearity("Primitive column has the wrong length")
        if np.any(np.diff(xi) <= 0) or xi[0] < 0:
            raise InvalidNonlinearity(
                "Table xi column must be nonnegative and strictly increasing"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidNonlinearity("Table holds non-finite values")
        if xi[0] > 0:
            xi.insert(0, 0.0)
            values.insert(0, 0.0)
            if prim is not None:
                prim.insert(0, 0.0)
        object.__setattr__(self, "xi", tuple(xi))
        object.__setattr__(self, "values", tuple(values))
        if prim is not None:
            object.__setattr__(self, "primitive_values", tuple(prim))

    @classmethod
    def from_csv(cls, path) -> "TableNonlinearity":
        """Columns xi, f and an optional F"""
        path = pathlib.Path(path)
        try:
            table = np.genfromtxt(path, delimiter=",", comments="#", ndmin=2)
        except OSError as error:
            raise InvalidConfig(f"Cannot read nonlinearity: {error}") from None
        table = table[~np.isnan(table).any(axis=1)]
        if table.shape[1] not in (2, 3):
            raise InvalidNonlinearity(
                f"{path.name}: expected columns xi, f[, F]"
            )
        prim = tuple(table[:, 2]) if table.shape[1] == 3 else None
        return cls(tuple(table[:, 0]), tuple(table[:, 1]), prim, str(path))

    @property
    def xi_max(self) -> float:
        return self.xi[-1]

    def f(self, xi):
        xi = np.asarray(xi, float)
        return np.where(xi > 0, np.interp(xi, self.xi, self.values), 0.0)

    def _nodal_primitive(self) -> np.ndarray:
        if self.primitive_values is not None:
            return np.asarray(self.primitive_values)
        x = np.asarray(self.xi)
        y = np.asarray(self.values)
        areas = 0.5 * (y[1:] + y[:-1]) * np.diff(x)
        return np.concatenate([[0.0], np.cumsum(areas)])

    def primitive(self, xi):
        xi = np.clip(np.asarray(xi, float), 0.0, None)
        x = np.asarray(self.xi)
        y = np.asarray(self.values)
        nodal = self._nodal_primitive()
        inside = np.minimum(xi, x[-1])
        i = np.clip(np.searchsorted(x, inside, side="right") - 1, 0, len(x) - 2)
        dx = inside - x[i]
        slope = (y[i + 1] - y[i]) / (x[i + 1] - x[i])
        if self.primitive_values is None:
            value = nodal[i] + y[i] * dx + 0.5 * slope * dx * dx
        else:
            value = np.interp(inside, x, nodal)
        return value + y[-1] * (xi - inside)

    def validation_grid(self, points):
        positive = [x for x in self.xi if x > 0]
        return np.geomspace(positive[0], self.xi_max, points)

    @property
    def label(self):
        return f"table:{self.source}"


def nonlinearity_from_mapping(mapping, base_dir=None) -> Nonlinearity:
    """Build f from a nonlinearity config section"""
    family = mapping.get("family", "power").strip().lower()
    if family == "power":
        try:
            return PowerNonlinearity(float(mapping.get("q", "")))
        except ValueError:
            raise InvalidConfig(
                f"Bad power exponent: {mapping.get('q')!r}"
            ) from None
    if family == "table":
        path = pathlib.Path(mapping.get("path", ""))
        if base_dir is not None and not path.is_absolute():
            path = pathlib.Path(base_dir) / path
        return TableNonlinearity.from_csv(path)
    raise InvalidConfig(f"Unknown nonlinearity family: {family!r}")


@dataclasses.dataclass(frozen=True)
class NonlinearityReport:
    quotient_decreasing: bool
    nondecreasing: bool
    sign_ok: bool
    zero_blowup: bool
    infinity_vanishing: bool
    grid_points: int

    @property
    def ok(self) -> bool:
        return all(
            (
                self.quotient_decreasing,
                self.nondecreasing,
                self.sign_ok,
                self.zero_blowup,
                self.infinity_vanishing,
            )
        )

    def as_dict(self) -> dict:
        return {
            "quotientDecreasing": self.quotient_decreasing,
            "nondecreasing": self.nondecreasing,
            "signOk": self.sign_ok,
            "zeroBlowup": self.zero_blowup,
            "infinityVanishing": self.infinity_vanishing,
            "gridPoints": self.grid_points,
            "ok": self.ok,
        }


def _decade_slope(xi, quotient, end: bool) -> float:
    """Log-log slope of f(ξ)/ξ over the first or last decade of xi"""
    logx = np.log10(xi)
    logq = np.log10(quotient)
    if end:
        mask = logx >= logx[-1] - 1
    else:
        mask = logx <= logx[0] + 1
    idx = np.flatnonzero(mask)
    first, last = idx[0], idx[-1]
    if first == last:
        first, last = 0, len(xi) - 1
    return (logq[last] - logq[first]) / (logx[last] - logx[first])


def validate_nonlinearity(
    f: Nonlinearity, grid_points: int = 256
) -> NonlinearityReport:
    """Check the sublinear hypotheses of f on a log-spaced grid"""
    if grid_points < 32:
        raise ValueError(f"Need at least 32 grid points, got {grid_points}")
    xi = f.validation_grid(grid_points)
    values = f.f(xi)
    negative = f.f(-xi)
    sign_ok = bool(
        np.all(values >= 0)
        and float(f.f(0.0)) == 0
        and np.all(negative == 0)
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        quotient = values / xi
    quotient_decreasing = bool(np.all(np.diff(quotient) < 0))
    nondecreasing = bool(np.all(np.diff(values) >= 0))
    if np.all(quotient > 0):
        zero_blowup = _decade_slope(xi, quotient, end=False) <= TREND_SLOPE
        vanishing = _decade_slope(xi, quotient, end=True) <= TREND_SLOPE
    else:
        zero_blowup = vanishing = False
    report = NonlinearityReport(
        quotient_decreasing=quotient_decreasing,
        nondecreasing=nondecreasing,
        sign_ok=sign_ok,
        zero_blowup=bool(zero_blowup),
        infinity_vanishing=bool(vanishing),
        grid_points=len(xi),
    )
    log.debug("Validated nonlinearity %s: %s", f.label, report)
    return report


# Coefficient
# -----------


@dataclasses.dataclass(frozen=True, eq=False)
class Coefficient:
    """Positive nodal coefficient α"""

    alpha: GridFunction
    label: str = "custom"

    def __post_init__(self):
        values = self.alpha.values
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise InvalidCoefficient(
                f"Coefficient {self.label} must be positive at every node"
            )

    @property
    def spec(self) -> DomainSpec:
        return self.alpha.spec

    @property
    def values(self) -> np.ndarray:
        return self.alpha.values

    @property
    def ess_sup(self) -> float:
        return float(np.max(self.alpha.values))

    @property
    def integral(self) -> float:
        """Σ M_ii α_i"""
        return math.prod(self.spec.widths) * float(np.sum(self.alpha.values))

    @classmethod
    def sample(cls, spec, func, label="custom") -> "Coefficient":
        return cls(GridFunction.sample(spec, func), label)

    @classmethod
    def constant(cls, spec: DomainSpec, value: float = 1.0) -> "Coefficient":
        return cls(GridFunction.constant(spec, value), f"constant:{value:g}")

    @classmethod
    def ramp(
        cls, spec: DomainSpec, slope: float = 1.0, base: float = 1.0
    ) -> "Coefficient":
        """α = base + slope·x"""
        x = spec.coordinates()[:, 0]
        return cls(
            GridFunction(base + slope * x, spec), f"ramp:{base:g}:{slope:g}"
        )

    @classmethod
    def checkerboard(
        cls,
        spec: DomainSpec,
        low: float = 1.0,
        high: float = 2.0,
        cells: int = 2,
    ) -> "Coefficient":
        """Alternate low and high on a cells^ndim board"""
        coords = spec.coordinates()
        index = np.zeros(len(coords), dtype=int)
        for axis, length in enumerate(spec.lengths):
            cell = np.floor(coords[:, axis] / length * cells).astype(int)
            index += np.minimum(cell, cells - 1)
        values = np.where(index % 2 == 0, low, high)
        return cls(
            GridFunction(values, spec), f"checkerboard:{low:g}:{high:g}"
        )

    @classmethod
    def from_csv(cls, spec: DomainSpec, path) -> "Coefficient":
        return cls(GridFunction.from_csv(spec, path), f"csv:{path}")

    def check(self, op: DiscreteLaplacian):
        if self.spec != op.spec:
            raise DimensionMismatch(
                f"Coefficient lives on {self.spec.resolution}, "
                f"operator on {op.spec.resolution}"
            )


def coefficient_from_mapping(
    spec: DomainSpec, mapping, base_dir=None
) -> Coefficient:
    """Build α from an alpha config section"""
    kind = mapping.get("kind", "constant").strip().lower()
    try:
        if kind == "constant":
            return Coefficient.constant(spec, float(mapping.get("value", 1)))
        if kind == "ramp":
            return Coefficient.ramp(
                spec,
                slope=float(mapping.get("slope", 1)),
                base=float(mapping.get("base", 1)),
            )
        if kind == "checkerboard":
            return Coefficient.checkerboard(
                spec,
                low=float(mapping.get("low", 1)),
                high=float(mapping.get("high", 2)),
                cells=int(mapping.get("cells", 2)),
            )
    except ValueError as error:
        raise InvalidConfig(f"Bad alpha entry: {error}") from None
    if kind == "csv":
        path = pathlib.Path(mapping.get("path", ""))
        if base_dir is not None and not path.is_absolute():
            path = pathlib.Path(base_dir) / path
        try:
            return Coefficient.from_csv(spec, path)
        except OSError as error:
            raise InvalidConfig(f"Cannot read coefficient: {error}") from None
    raise InvalidConfig(f"Unknown coefficient kind: {kind!r}")


# Functionals
# -----------


def functional_j(
    op: DiscreteLaplacian, coeff: Coefficient, f: Nonlinearity, u
) -> float:
    """J(u) = 2 Σ M_ii α_i F(u_i⁺)"""
    coeff.check(op)
    values = op.check(u)
    return 2 * float(op.mass @ (coeff.values * f.primitive(values)))


def frozen_energy(
    op: DiscreteLaplacian, coeff: Coefficient, f: Nonlinearity, lam: float, u
) -> float:
    """λΦ(u) − J(u)"""
    if not lam > 0:
        raise ValueError(f"lambda must be positive: {lam!r}")
    return lam * dirichlet_energy(op, u) - functional_j(op, coeff, f, u)


def frozen_functional(op, coeff, f, lam, u) -> float:
    """½[λΦ(u) − J(u)], i.e. ½λΦ(u) − ∫αF(u⁺)"""
    return 0.5 * frozen_energy(op, coeff, f, lam, u)


def frozen_residual(
    op: DiscreteLaplacian, coeff: Coefficient, f: Nonlinearity, lam, u
) -> float:
    """‖λAu − M(α⊙f(u))‖ / ‖M(α⊙f(u))‖"""
    values = op.check(u)
    source = op.mass * coeff.values * f.f(values)
    scale = np.linalg.norm(source)
    if scale == 0:
        return math.inf
    return float(np.linalg.norm(lam * op.apply(values) - source) / scale)


def j_increases_along(
    op: DiscreteLaplacian,
    coeff: Coefficient,
    f: Nonlinearity,
    u,
    factors: typing.Sequence[float] = (1, 2, 4, 8, 16),
) -> bool:
    """True if J(c·u) strictly increases along the given scalings.

    J has no global maximum, so this holds for any u with u⁺ ≠ 0.
    """
    values = op.check(u)
    series = [functional_j(op, coeff, f, c * values) for c in factors]
    return bool(np.all(np.diff(series) > 0))


# Solver
# ------


@dataclasses.dataclass(frozen=True, eq=False)
class SublinearSolution:
    u: GridFunction
    lam: float
    phi: float
    energy: float
    iterations: int
    residual: float


def supersolution(
    op: DiscreteLaplacian,
    coeff: Coefficient,
    f: Nonlinearity,
    lam: float,
    linear_tol: float = INNER_TOL,
) -> GridFunction:
    """A constant multiple of w, the solution of −Δw = α.

    For f(ξ) = ξ^q the multiple is explicit. Otherwise the smallest
    power of two c with c·λ >= f(c·max w) is used.
    """
    w = solve_spd(op, coeff.values, linear_tol)
    wmax = float(np.max(w.values))
    if isinstance(f, PowerNonlinearity):
        q = f.q
        bound = (wmax / lam) ** (1 / (1 - q))
        return w.with_values(bound ** q / lam * w.values)
    c = 1.0
    for _ in range(MAX_DOUBLINGS):
        if c * lam >= float(f.f(c * wmax)):
            return w.with_values(c * w.values)
        c *= 2
    raise NoConvergence(
        f"No supersolution multiple found for lambda={lam:g}",
        iterations=MAX_DOUBLINGS,
    )


def solve_frozen(
    op: DiscreteLaplacian,
    coeff: Coefficient,
    f: Nonlinearity,
    lam: float,
    tol: float = FROZEN_TOL,
    *,
    residual_tol: float = RESIDUAL_TOL,
    linear_tol: float = INNER_TOL,
    max_iterations: int = MAX_ITERATIONS,
    start: GridFunction = None,
    scale: float = 1.0,
    callback=None,
) -> SublinearSolution:
    """Positive solution of −Δu = (1/λ)αf(u) by monotone iteration.

    Each step solves A u_{k+1} = M α f(u_k) / λ, warm started at u_k.
    The iteration stops once the relative max-norm step is <= tol and
    the residual is <= residual_tol.

    start: Known supersolution, e.g. u_λ' for some λ' < λ
    scale: Factor >= 1 applied to the initial supersolution
    callback: Called as callback(k, u_k) for every iterate
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive: {lam!r}")
    if tol <= 0 or residual_tol <= 0:
        raise ValueError("Tolerances must be positive")
    if scale < 1:
        raise ValueError(f"Supersolution scale must be >= 1: {scale!r}")
    coeff.check(op)
    if start is None:
        u0 = supersolution(op, coeff, f, lam, linear_tol).values
    else:
        u0 = op.check(start).copy()
    u = scale * u0
    floor = POSITIVITY_FLOOR * float(np.max(u))
    warned = False
    if callback is not None:
        callback(0, GridFunction(u, op.spec))
    for k in range(1, max_iterations + 1):
        rhs = coeff.values * f.f(u) / lam
        new = solve_spd(op, rhs, linear_tol, x0=u).values
        unew = float(np.max(np.abs(new)))
        if unew < floor:
            raise DegenerateLimit(
                f"Iterate collapsed to max {unew:.3g} at step {k} "
                f"(lambda={lam:g})"
            )
        if not warned and np.any(new > u + 1e-8 * unew):
            log.warning(
                "Non-monotone iterate at step %d (lambda=%g); "
                "start is not a supersolution",
                k,
                lam,
            )
            warned = True
        step = float(np.max(np.abs(new - u))) / unew
        u = new
        if callback is not None:
            callback(k, GridFunction(u, op.spec))
        log.debug("Frozen step %d (lambda=%g): %.3e", k, lam, step)
        if step > tol:
            continue
        residual = frozen_residual(op, coeff, f, lam, u)
        if residual <= residual_tol:
            break
    else:
        raise NoConvergence(
            f"Frozen iteration did not converge in {max_iterations} steps "
            f"(lambda={lam:g})",
            iterations=max_iterations,
        )
    if np.min(u) <= 0:
        raise DegenerateLimit(
            f"Frozen solution is not positive (lambda={lam:g})"
        )
    solution = GridFunction(u, op.spec)
    phi = dirichlet_energy(op, solution)
    return SublinearSolution(
        u=solution,
        lam=float(lam),
        phi=phi,
        energy=lam * phi - functional_j(op, coeff, f, solution),
        iterations=k,
        residual=residual,
    )


def scale_solution(
    op: DiscreteLaplacian,
    coeff: Coefficient,
    f: PowerNonlinearity,
    base: SublinearSolution,
    lam_new: float,
) -> SublinearSolution:
    """u_λ from u_base by homogeneity of ξ^q.

    u_λ = (λ/λ_base)^(−1/(1−q))·u_base and Φ scales with the squared
    factor. The residual is recomputed.
    """
    if not isinstance(f, PowerNonlinearity):
        raise InvalidNonlinearity("Scaling needs a power nonlinearity")
    if not lam_new > 0:
        raise ValueError(f"lambda must be positive: {lam_new!r}")
    factor = (lam_new / base.lam) ** (-1 / (1 - f.q))
    u = base.u.with_values(factor * base.u.values)
    phi = factor * factor * base.phi
    return SublinearSolution(
        u=u,
        lam=float(lam_new),
        phi=phi,
        energy=lam_new * phi - functional_j(op, coeff, f, u),
        iterations=0,
        residual=frozen_residual(op, coeff, f, lam_new, u),
    )
