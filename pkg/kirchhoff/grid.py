"""Structured grids and the discrete Dirichlet Laplacian

The domain is a 1D interval (0, L) or a 2D rectangle (0, a) x (0, b)
with homogeneous Dirichlet conditions. Unknowns live on the interior
nodes only, so boundary values are identically zero. Nodes are ordered
lexicographically in (x, y).
"""

# Built-in
import dataclasses
import enum
import functools
import logging
import math
import pathlib
import typing

# PyPI
import numpy as np
import scipy.sparse
import scipy.sparse.linalg

# Package
from kirchhoff.errors import DimensionMismatch, InvalidDomain, NoConvergence

log = logging.getLogger(__name__)

LINEAR_TOL = 1e-10
EIGEN_TOL = 1e-10
EIGEN_MAX_ITERATIONS = 500


class Kind(enum.Enum):
    INTERVAL = "interval"
    RECTANGLE = "rectangle"


@dataclasses.dataclass(frozen=True)
class DomainSpec:
    """Discretized domain: kind, side lengths and interior subdivisions"""

    kind: Kind
    lengths: typing.Tuple[float, ...]
    resolution: typing.Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(
            self, "lengths", tuple(float(x) for x in self.lengths)
        )
        object.__setattr__(
            self, "resolution", tuple(int(m) for m in self.resolution)
        )
        ndim = 1 if self.kind is Kind.INTERVAL else 2
        if len(self.lengths) != ndim or len(self.resolution) != ndim:
            raise InvalidDomain(
                f"{self.kind.value} needs {ndim} length(s) and "
                f"{ndim} resolution(s), got {self.lengths} and "
                f"{self.resolution}"
            )
        for length in self.lengths:
            if not (math.isfinite(length) and length > 0):
                raise InvalidDomain(f"Length must be positive: {length!r}")
        for m in self.resolution:
            if m < 2:
                raise InvalidDomain(
                    f"Resolution must be at least 2 per axis, got {m}"
                )

    @classmethod
    def interval(cls, length: float, resolution: int) -> "DomainSpec":
        return cls(Kind.INTERVAL, (length,), (resolution,))

    @classmethod
    def rectangle(
        cls, a: float, b: float, mx: int, my: int = None
    ) -> "DomainSpec":
        return cls(Kind.RECTANGLE, (a, b), (mx, mx if my is None else my))

    @property
    def ndim(self) -> int:
        return len(self.lengths)

    @property
    def widths(self) -> typing.Tuple[float, ...]:
        """Mesh width per axis, h = length / (subdivisions + 1)"""
        return tuple(L / (m + 1) for L, m in zip(self.lengths, self.resolution))

    @property
    def node_count(self) -> int:
        return math.prod(self.resolution)

    @property
    def measure(self) -> float:
        return math.prod(self.lengths)

    def axes(self) -> typing.List[np.ndarray]:
        """Interior node coordinates per axis"""
        return [
            h * np.arange(1, m + 1)
            for h, m in zip(self.widths, self.resolution)
        ]

    def coordinates(self) -> np.ndarray:
        """Array of shape (node_count, ndim) in node order"""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.column_stack([c.ravel() for c in mesh])

    def refined(self, factor: int = 2) -> "DomainSpec":
        """Same domain with the mesh width divided by ``factor``"""
        return DomainSpec(
            self.kind,
            self.lengths,
            tuple(factor * (m + 1) - 1 for m in self.resolution),
        )

    def as_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "lengths": list(self.lengths),
            "resolution": list(self.resolution),
        }


@dataclasses.dataclass(frozen=True, eq=False)
class GridFunction:
    """Nodal values of a function vanishing on the boundary"""

    values: np.ndarray
    spec: DomainSpec

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.spec.node_count,):
            raise DimensionMismatch(
                f"Expected {self.spec.node_count} nodal values, "
                f"got shape {values.shape}"
            )
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)

    @classmethod
    def zeros(cls, spec: DomainSpec) -> "GridFunction":
        return cls(np.zeros(spec.node_count), spec)

    @classmethod
    def constant(cls, spec: DomainSpec, value: float) -> "GridFunction":
        return cls(np.full(spec.node_count, float(value)), spec)

    @classmethod
    def sample(cls, spec: DomainSpec, func) -> "GridFunction":
        """Evaluate ``func(x)`` or ``func(x, y)`` on the interior nodes"""
        coords = spec.coordinates()
        values = func(*coords.T)
        values = np.broadcast_to(np.asarray(values, float), len(coords))
        return cls(values.copy(), spec)

    def with_values(self, values) -> "GridFunction":
        return GridFunction(values, self.spec)

    def to_csv(self, path) -> None:
        """Write columns (nodeIndex, x[, y], value) in node order"""
        coords = self.spec.coordinates()
        index = np.arange(len(self.values))
        table = np.column_stack([index, coords, self.values])
        names = ["nodeIndex", "x", "y"][: 1 + self.spec.ndim] + ["value"]
        fmt = ["%d"] + ["%.17g"] * (self.spec.ndim + 1)
        np.savetxt(
            path, table, delimiter=",", header=",".join(names),
            comments="", fmt=fmt,
        )

    @classmethod
    def from_csv(cls, spec: DomainSpec, path) -> "GridFunction":
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if table.shape[1] != spec.ndim + 2:
            raise DimensionMismatch(
                f"{pathlib.Path(path).name}: expected {spec.ndim + 2} "
                f"columns, got {table.shape[1]}"
            )
        order = np.argsort(table[:, 0], kind="stable")
        return cls(table[order, -1], spec)


def _second_difference(m: int) -> scipy.sparse.csr_matrix:
    """tridiag(-1, 2, -1) of size m"""
    return scipy.sparse.diags(
        [-np.ones(m - 1), 2 * np.ones(m), -np.ones(m - 1)],
        [-1, 0, 1],
        format="csr",
    )


@dataclasses.dataclass(frozen=True, eq=False)
class DiscreteLaplacian:
    """Stiffness A and lumped mass M of the Dirichlet Laplacian.

    uᵀAu approximates ∫|∇u|² and M holds the nodal quadrature weights,
    so A u = M g is the discrete form of −Δu = g.
    """

    stiffness: scipy.sparse.csr_matrix
    mass: np.ndarray
    spec: DomainSpec

    @property
    def node_count(self) -> int:
        return self.spec.node_count

    @functools.cached_property
    def mass_matrix(self) -> scipy.sparse.dia_matrix:
        return scipy.sparse.diags(self.mass)

    def check(self, u) -> np.ndarray:
        """Return the value array of u after a dimension check"""
        values = u.values if isinstance(u, GridFunction) else np.asarray(u)
        if values.shape != (self.node_count,):
            raise DimensionMismatch(
                f"Grid function has shape {values.shape}, "
                f"operator has {self.node_count} nodes"
            )
        return values

    def apply(self, u) -> np.ndarray:
        return self.stiffness @ self.check(u)

    def integrate(self, values) -> float:
        """Lumped quadrature Σ M_ii v_i"""
        return float(self.mass @ self.check(values))


def build_operators(spec: DomainSpec) -> DiscreteLaplacian:
    """Assemble stiffness and lumped mass for a validated domain"""
    if spec.kind is Kind.INTERVAL:
        (h,) = spec.widths
        (m,) = spec.resolution
        stiffness = _second_difference(m) / h
        mass = np.full(m, h)
    else:
        hx, hy = spec.widths
        mx, my = spec.resolution
        tx = _second_difference(mx)
        ty = _second_difference(my)
        stiffness = (hy / hx) * scipy.sparse.kron(
            tx, scipy.sparse.identity(my)
        ) + (hx / hy) * scipy.sparse.kron(scipy.sparse.identity(mx), ty)
        mass = np.full(mx * my, hx * hy)
    log.debug(
        "Assembled %s operators with %d nodes", spec.kind.value,
        spec.node_count,
    )
    return DiscreteLaplacian(stiffness.tocsr(), mass, spec)


def dirichlet_energy(op: DiscreteLaplacian, u) -> float:
    """Φ(u) = ∫|∇u|², discretely uᵀAu"""
    values = op.check(u)
    return max(float(values @ (op.stiffness @ values)), 0.0)


def solve_spd(
    op: DiscreteLaplacian, rhs, tol: float = LINEAR_TOL, *, x0=None
) -> GridFunction:
    """Solve A u = M g by conjugate gradients.

    ``rhs`` holds the nodal values of g. The iteration stops when
    ‖Au − Mg‖ ≤ tol‖Mg‖; ``x0`` is an optional warm start.
    """
    if tol <= 0:
        raise ValueError(f"Tolerance must be positive: {tol!r}")
    g = op.check(rhs)
    b = op.mass * g
    if not np.any(b):
        return GridFunction.zeros(op.spec)
    guess = None if x0 is None else op.check(x0)
    maxiter = 50 * op.node_count
    u, info = scipy.sparse.linalg.cg(
        op.stiffness, b, x0=guess, rtol=tol, atol=0.0, maxiter=maxiter
    )
    if info > 0:
        raise NoConvergence(
            f"CG did not converge in {maxiter} iterations (tol={tol:g})",
            iterations=maxiter,
        )
    if info < 0:
        raise ValueError(f"Illegal input to CG (info={info})")
    return GridFunction(u, op.spec)


def principal_eigenvalue(
    op: DiscreteLaplacian,
    tol: float = EIGEN_TOL,
    *,
    linear_tol: float = LINEAR_TOL,
    max_iterations: int = EIGEN_MAX_ITERATIONS,
) -> typing.Tuple[float, GridFunction]:
    """λ₁ and e₁ of A e = λ M e by inverse power iteration.

    Starts from the all-ones vector, so e₁ stays positive. e₁ is
    normalized to ‖e₁‖_M = 1.
    """
    if tol <= 0:
        raise ValueError(f"Tolerance must be positive: {tol!r}")
    x = np.ones(op.node_count)
    x /= math.sqrt(x @ (op.mass * x))
    rayleigh = float(x @ (op.stiffness @ x))
    for i in range(1, max_iterations + 1):
        # A y = M x, the rhs of solve_spd is given as nodal values
        y = solve_spd(op, x, linear_tol, x0=x / rayleigh).values
        y /= math.sqrt(y @ (op.mass * y))
        if y.sum() < 0:
            y = -y
        new = float(y @ (op.stiffness @ y))
        log.debug("Inverse power iteration %d: %.16g", i, new)
        converged = abs(new - rayleigh) <= tol * abs(new)
        x, rayleigh = y, new
        if converged:
            return rayleigh, GridFunction(x, op.spec)
    raise NoConvergence(
        f"Inverse power iteration did not converge in {max_iterations} "
        "iterations",
        iterations=max_iterations,
    )


def continuum_eigenvalue(spec: DomainSpec) -> float:
    """Principal Dirichlet eigenvalue of the continuous domain"""
    return math.pi ** 2 * sum(1 / L ** 2 for L in spec.lengths)


def convergence_order(values: typing.Sequence[float], ratio: float = 2):
    """Observed order from three successive refinements.

    ``values`` are computed at mesh widths h, h/ratio, h/ratio².
    """
    if len(values) != 3:
        raise ValueError("Need exactly three refinement levels")
    v0, v1, v2 = values
    return math.log(abs(v0 - v1) / abs(v1 - v2)) / math.log(ratio)
