"""Scalar fixed-point equation selecting the solution on a branch

The Kirchhoff solution ũ solves the frozen problem at λ̃ = K(t̃)
where t̃ = Φ(ũ) lies in I. Two routes find it:

* λ-bisection on g(λ) = Ψ⁻¹(λ) − Φ(u_λ), which is increasing in λ and
  works for any sublinear f.
* The t-equation K(t)^(2/(1−q))·t = Φ(u₁) for f(ξ) = ξ^q, which needs a
  single frozen solve thanks to the scaling u_λ = λ^(−1/(1−q))·u₁.
"""

# Built-in
import dataclasses
import enum
import logging
import math
import typing

# PyPI
import numpy as np

# Package
from kirchhoff.errors import (
    InvalidConfig,
    InvalidNonlinearity,
    NoConvergence,
    NoCrossing,
    OutOfRange,
    SaddleViolation,
)
from kirchhoff.grid import DiscreteLaplacian, GridFunction, dirichlet_energy
from kirchhoff.kfun import (
    KirchhoffBranch,
    eval_k,
    integral_psi_inverse,
    psi_inverse,
)
from kirchhoff.roots import bisect_increasing, bisect_log
from kirchhoff.sublinear import (
    Coefficient,
    Nonlinearity,
    PowerNonlinearity,
    SublinearSolution,
    frozen_residual,
    functional_j,
    scale_solution,
    solve_frozen,
)

log = logging.getLogger(__name__)

LAMBDA_MIN = 1e-8
LAMBDA_MAX = 1e8
MAX_HALVINGS = 1100
SADDLE_EPS = 1e-7
# Scalar roots are resolved well below tol.root
ROOT_FACTOR = 1e-3
POLISH_STEPS = 12
RANGE_CAVEAT = (
    "K(I) does not cover (0, +inf) on this branch, so the fixed-point "
    "equation may have no root in I"
)


class Route(enum.Enum):
    AUTO = "auto"
    LAMBDA_BISECT = "lambda"
    T_EQUATION = "t"


@dataclasses.dataclass(frozen=True)
class Tolerances:
    """Tolerances shared by the solvers.

    linear: Relative residual of the inner CG solves
    frozen: Relative max-norm step of the monotone iteration
    root: Scalar root finding on λ or t
    verify: Localization identity and verification checks
    residual: Declared residual of the frozen and Kirchhoff equations
    """

    linear: float = 1e-12
    frozen: float = 1e-10
    root: float = 1e-10
    verify: float = 1e-8
    residual: float = 1e-8

    def __post_init__(self):
        for field in dataclasses.fields(self):
            value = getattr(self, field.name)
            if not (isinstance(value, (int, float)) and value > 0):
                raise InvalidConfig(
                    f"Tolerance {field.name} must be positive: {value!r}"
                )

    @classmethod
    def from_section(cls, mapping) -> "Tolerances":
        kwargs = dict()
        for field in dataclasses.fields(cls):
            key = f"{field.name}_tol"
            if mapping.get(key) is None:
                continue
            try:
                kwargs[field.name] = float(mapping[key])
            except ValueError:
                raise InvalidConfig(
                    f"Bad tolerance {key}={mapping[key]!r}"
                ) from None
        return cls(**kwargs)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclasses.dataclass(frozen=True, eq=False)
class KirchhoffSolution:
    u: GridFunction
    t_tilde: float
    lam_tilde: float
    branch: KirchhoffBranch
    kirchhoff_residual: float
    route: Route
    inner_solves: int
    inner_iterations: int
    localization_error: float
    phi_unit: typing.Optional[float] = None

    @property
    def boundary_distance(self) -> float:
        """Distance of t̃ to the boundary of I"""
        lo, hi = self.branch.interval
        return min(self.t_tilde - lo, hi - self.t_tilde)

    def as_dict(self) -> dict:
        return {
            "branch": self.branch.as_dict(),
            "tTilde": self.t_tilde,
            "lamTilde": self.lam_tilde,
            "kirchhoffResidual": self.kirchhoff_residual,
            "route": self.route.value,
            "innerSolves": self.inner_solves,
            "innerIterations": self.inner_iterations,
            "localizationError": self.localization_error,
            "boundaryDistance": self.boundary_distance,
        }


def phi_aux(
    op: DiscreteLaplacian,
    coeff: Coefficient,
    f: Nonlinearity,
    branch: KirchhoffBranch,
    u,
    lam: float,
) -> float:
    """φ(u, λ) = λΦ(u) − J(u) − ∫₀^λ Ψ⁻¹"""
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative: {lam!r}")
    energy = lam * dirichlet_energy(op, u) if lam else 0.0
    return (
        energy
        - functional_j(op, coeff, f, u)
        - integral_psi_inverse(branch, lam)
    )


def kirchhoff_residual(op, coeff, f, branch, u, t: float) -> float:
    """‖K(t)Au − M(α⊙f(u))‖ / ‖M(α⊙f(u))‖"""
    return frozen_residual(op, coeff, f, eval_k(branch, t), u)


def ray_multiplier(op, coeff, f, u) -> float:
    """λ(u) = uᵀM(α⊙f(u)) / uᵀAu, the best frozen λ for the shape of u"""
    values = op.check(u)
    energy = dirichlet_energy(op, values)
    if energy == 0:
        return math.inf
    return float(values @ (op.mass * coeff.values * f.f(values))) / energy


def polish_on_ray(
    op,
    coeff,
    f,
    branch: KirchhoffBranch,
    u: GridFunction,
    tol: Tolerances,
    max_steps: int = POLISH_STEPS,
) -> typing.Tuple[GridFunction, float, float]:
    """Rescale u until K(Φ(u)) matches its ray multiplier.

    On steep branches a root of the scalar equation that is exact to
    the last digit still leaves K(Φ(u)) off by K′·δt. Each step moves
    u along its ray to Φ = Ψ⁻¹(λ(u)). Returns the best (u, t, residual)
    seen; the input is returned when no step improves it.
    """
    t = dirichlet_energy(op, u)
    best = (u, t, kirchhoff_residual(op, coeff, f, branch, u, t))
    for step in range(max_steps):
        try:
            target = psi_inverse(branch, ray_multiplier(op, coeff, f, u))
        except OutOfRange:
            break
        if not (branch.contains(target) and t > 0):
            break
        u = u.with_values(math.sqrt(target / t) * u.values)
        t = dirichlet_energy(op, u)
        if not branch.contains(t):
            break
        residual = kirchhoff_residual(op, coeff, f, branch, u, t)
        if residual < best[2]:
            best = (u, t, residual)
        if residual <= tol.residual:
            break
    log.debug(
        "Polished on %s after %d steps: residual=%.2e",
        branch.label,
        step + 1 if max_steps else 0,
        best[2],
    )
    return best


def _assemble(
    op,
    coeff,
    f,
    branch: KirchhoffBranch,
    u: GridFunction,
    route: Route,
    tol: Tolerances,
    inner_solves: int,
    inner_iterations: int,
    phi_unit: float = None,
) -> KirchhoffSolution:
    """Build the solution record and check its invariants"""
    t = dirichlet_energy(op, u)
    if not branch.contains(t):
        raise NoCrossing(
            f"Phi(u)={t:.6g} fell outside I of {branch.label}",
            diagnostics={"branch": branch.as_dict(), "tTilde": t},
        )
    residual = kirchhoff_residual(op, coeff, f, branch, u, t)
    if residual > tol.residual:
        u, t, residual = polish_on_ray(op, coeff, f, branch, u, tol)
    lam = eval_k(branch, t)
    error = abs(psi_inverse(branch, lam) - t)
    if error > tol.verify * max(1.0, t):
        raise NoConvergence(
            f"Fixed-point identity violated on {branch.label}: "
            f"|psi_inverse(lam) - t| = {error:.3g}"
        )
    if residual > tol.residual:
        raise NoConvergence(
            f"Kirchhoff residual {residual:.3g} exceeds {tol.residual:g} "
            f"on {branch.label}"
        )
    log.info(
        "Solution on %s: t=%.12g lambda=%.12g residual=%.2e",
        branch.label,
        t,
        lam,
        residual,
    )
    return KirchhoffSolution(
        u=u,
        t_tilde=t,
        lam_tilde=lam,
        branch=branch,
        kirchhoff_residual=residual,
        route=route,
        inner_solves=inner_solves,
        inner_iterations=inner_iterations,
        localization_error=error,
        phi_unit=phi_unit,
    )


class _FrozenCache:
    """Frozen solutions by λ, seeding new solves from below"""

    def __init__(self, op, coeff, f, tol: Tolerances):
        self.op = op
        self.coeff = coeff
        self.f = f
        self.tol = tol
        self.solutions: typing.Dict[float, SublinearSolution] = dict()
        self.iterations = 0

    def __len__(self):
        return len(self.solutions)

    def __call__(self, lam: float) -> SublinearSolution:
        try:
            return self.solutions[lam]
        except KeyError:
            pass
        below = [x for x in self.solutions if x < lam]
        start = self.solutions[max(below)].u if below else None
        sol = solve_frozen(
            self.op,
            self.coeff,
            self.f,
            lam,
            self.tol.frozen,
            residual_tol=self.tol.residual,
            linear_tol=self.tol.linear,
            start=start,
        )
        self.iterations += sol.iterations
        self.solutions[lam] = sol
        return sol


def solve_lambda_bisect(
    op: DiscreteLaplacian,
    coeff: Coefficient,
    f: Nonlinearity,
    branch: KirchhoffBranch,
    tol: Tolerances = None,
    *,
    start: float = 1.0,
) -> KirchhoffSolution:
    """Root of g(λ) = Ψ⁻¹(λ) − Φ(u_λ) by geometric bracketing.

    The bracket grows from ``start`` by factors of two inside
    [max(1e-8, inf K), min(1e8, sup K)] and is then bisected in log λ.
    """
    tol = Tolerances() if tol is None else tol
    low, high = branch.limits()
    lam_lo = max(LAMBDA_MIN, low)
    lam_hi = min(LAMBDA_MAX, high)
    frozen = _FrozenCache(op, coeff, f, tol)

    def g(lam):
        return psi_inverse(branch, lam) - frozen(lam).phi

    def no_crossing(lo, glo, hi, ghi):
        diagnostics = {
            "branch": branch.as_dict(),
            "lamBounds": [lam_lo, lam_hi],
            "gAtLow": glo,
            "gAtHigh": ghi,
            "bracket": [lo, hi],
        }
        if not branch.range_full:
            diagnostics["caveat"] = RANGE_CAVEAT
        return NoCrossing(
            f"g(lambda) keeps its sign on [{lo:g}, {hi:g}] for "
            f"{branch.label}",
            diagnostics=diagnostics,
        )

    lam = min(max(start, lam_lo), lam_hi)
    g0 = g(lam)
    lo = hi = lam
    glo = ghi = g0
    if g0 < 0:
        while ghi < 0:
            if hi >= lam_hi:
                raise no_crossing(lam, g0, hi, ghi)
            lo, glo = hi, ghi
            hi = min(2 * hi, lam_hi)
            ghi = g(hi)
    elif g0 > 0:
        while glo > 0:
            if lo <= lam_lo:
                raise no_crossing(lo, glo, lam, g0)
            hi, ghi = lo, glo
            lo = max(lo / 2, lam_lo)
            glo = g(lo)
    log.info("Lambda bracket on %s: [%g, %g]", branch.label, lo, hi)

    if glo == 0:
        lam_tilde = lo
    elif ghi == 0:
        lam_tilde = hi
    else:

        def accept(x, gx):
            return abs(gx) <= ROOT_FACTOR * tol.root * max(1.0, frozen(x).phi)

        root = bisect_log(
            g,
            lo,
            hi,
            rtol=ROOT_FACTOR * tol.root,
            ftol=accept,
            flo=glo,
            fhi=ghi,
        )
        # Best of the last bracket, every candidate is cached
        lam_tilde = min((root.x, root.lo, root.hi), key=lambda x: abs(g(x)))
    u = frozen(lam_tilde).u
    return _assemble(
        op,
        coeff,
        f,
        branch,
        u,
        Route.LAMBDA_BISECT,
        tol,
        inner_solves=len(frozen),
        inner_iterations=frozen.iterations,
    )


def _default_bracket(branch: KirchhoffBranch):
    lo, hi = branch.interval
    if math.isinf(hi):
        scale = max(1.0, lo)
        return lo + 0.5 * scale, lo + 2.0 * scale
    width = hi - lo
    return lo + 0.25 * width, lo + 0.75 * width


def solve_t_equation(
    op: DiscreteLaplacian,
    coeff: Coefficient,
    f: PowerNonlinearity,
    branch: KirchhoffBranch,
    tol: Tolerances = None,
    *,
    bracket: typing.Tuple[float, float] = None,
    base: SublinearSolution = None,
) -> KirchhoffSolution:
    """Solve K(t)^(2/(1−q))·t = Φ(u₁) on I for f(ξ) = ξ^q.

    The equation is bisected in the form
    (2/(1−q))·log K(t) + log t − log Φ(u₁) = 0. The initial bracket
    is moved toward the ends of I until it straddles the root.

    bracket: Initial sub-bracket (a, b) inside I
    base: Precomputed frozen solution at λ = 1
    """
    if not isinstance(f, PowerNonlinearity):
        raise InvalidNonlinearity("The t-equation needs a power nonlinearity")
    tol = Tolerances() if tol is None else tol
    if base is None:
        base = solve_frozen(
            op,
            coeff,
            f,
            1.0,
            tol.frozen,
            residual_tol=tol.residual,
            linear_tol=tol.linear,
        )
    elif base.lam != 1:
        base = scale_solution(op, coeff, f, base, 1.0)
    t1 = base.phi
    exponent = 2 / (1 - f.q)
    lo_end, hi_end = branch.interval

    def h(t):
        return exponent * math.log(branch(t)) + math.log(t) - math.log(t1)

    a, b = _default_bracket(branch) if bracket is None else bracket
    if not (branch.contains(a) and branch.contains(b) and a < b):
        raise InvalidConfig(f"Bracket ({a}, {b}) is not inside I")

    def no_crossing(side, t, value):
        diagnostics = {
            "branch": branch.as_dict(),
            "t1": t1,
            "exponent": exponent,
            "side": side,
            "tEdge": t,
            "hEdge": value,
        }
        if not branch.range_full:
            diagnostics["caveat"] = RANGE_CAVEAT
        return NoCrossing(
            f"h(t) = K(t)^{exponent:g}·t - t1 keeps its sign toward the "
            f"{side} end of {branch.label}",
            diagnostics=diagnostics,
        )

    ha = h(a)
    for _ in range(MAX_HALVINGS):
        if ha <= 0:
            break
        nxt = lo_end + 0.5 * (a - lo_end)
        if nxt == a or nxt <= lo_end:
            raise no_crossing("lower", a, ha)
        a, ha = nxt, h(nxt)
    else:
        raise no_crossing("lower", a, ha)
    hb = h(b)
    for _ in range(MAX_HALVINGS):
        if hb >= 0:
            break
        if math.isinf(hi_end):
            nxt = lo_end + 2 * (b - lo_end)
        else:
            nxt = hi_end - 0.5 * (hi_end - b)
        if nxt == b or not nxt < hi_end or math.isinf(nxt):
            raise no_crossing("upper", b, hb)
        b, hb = nxt, h(nxt)
    else:
        raise no_crossing("upper", b, hb)
    log.info("t bracket on %s: [%.12g, %.12g]", branch.label, a, b)

    root = bisect_increasing(
        h, a, b, xtol=0.0, ftol=ROOT_FACTOR * tol.root, flo=ha, fhi=hb
    )
    # λ with Φ(u_λ) = root.x, so K(Φ(ũ)) = λ up to a factor exp(h/exponent)
    lam = (t1 / root.x) ** (1 / exponent)
    scaled = scale_solution(op, coeff, f, base, lam)
    return _assemble(
        op,
        coeff,
        f,
        branch,
        scaled.u,
        Route.T_EQUATION,
        tol,
        inner_solves=1,
        inner_iterations=base.iterations,
        phi_unit=t1,
    )


def solve(
    op: DiscreteLaplacian,
    coeff: Coefficient,
    f: Nonlinearity,
    branch: KirchhoffBranch,
    route: Route = Route.AUTO,
    tol: Tolerances = None,
    **kwargs,
) -> KirchhoffSolution:
    """Dispatch to a route, AUTO takes the t-equation for power f"""
    route = Route(route)
    if route is Route.AUTO:
        if isinstance(f, PowerNonlinearity):
            route = Route.T_EQUATION
        else:
            route = Route.LAMBDA_BISECT
    if route is Route.T_EQUATION:
        if not isinstance(f, PowerNonlinearity):
            raise InvalidConfig("route=t requires a power nonlinearity")
        return solve_t_equation(op, coeff, f, branch, tol, **kwargs)
    return solve_lambda_bisect(op, coeff, f, branch, tol, **kwargs)


# Saddle point probe
# ------------------


@dataclasses.dataclass(frozen=True, eq=False)
class SaddleProbe:
    """φ sampled around the saddle point (ũ, λ̃).

    phi_lam[j] = φ(ũ, lam_samples[j]) and phi_u[i] = φ(u_samples[i], λ̃).
    """

    lam_samples: np.ndarray
    u_samples: typing.List[GridFunction]
    phi_lam: np.ndarray
    phi_u: np.ndarray
    phi_center: float
    eps: float
    seed: int

    @property
    def lam_margin(self) -> float:
        """Largest φ(ũ, λ) − φ(ũ, λ̃), at most eps when ok"""
        return float(np.max(self.phi_lam - self.phi_center))

    @property
    def u_margin(self) -> float:
        """Largest φ(ũ, λ̃) − φ(v, λ̃), at most eps when ok"""
        return float(np.max(self.phi_center - self.phi_u))

    @property
    def ok(self) -> bool:
        return self.lam_margin <= self.eps and self.u_margin <= self.eps

    def worst(self) -> dict:
        j = int(np.argmax(self.phi_lam - self.phi_center))
        i = int(np.argmax(self.phi_center - self.phi_u))
        return {
            "lambda": float(self.lam_samples[j]),
            "lambdaMargin": self.lam_margin,
            "uIndex": i,
            "uMargin": self.u_margin,
        }

    def as_dict(self) -> dict:
        return {
            "lamSamples": len(self.lam_samples),
            "uSamples": len(self.u_samples),
            "phiCenter": self.phi_center,
            "eps": self.eps,
            "seed": self.seed,
            "ok": self.ok,
            **self.worst(),
        }


def sine_modes(spec, coefficients: np.ndarray) -> np.ndarray:
    """Σ c_jk sin(jπx/a) sin(kπy/b) on the interior nodes"""
    coords = spec.coordinates()
    values = np.zeros(len(coords))
    for index in np.ndindex(*coefficients.shape):
        term = np.full(len(coords), coefficients[index])
        for axis, mode in enumerate(index):
            length = spec.lengths[axis]
            term *= np.sin((mode + 1) * math.pi * coords[:, axis] / length)
        values += term
    return values


def saddle_probe(
    solution: KirchhoffSolution,
    op: DiscreteLaplacian,
    coeff: Coefficient,
    f: Nonlinearity,
    branch: KirchhoffBranch = None,
    n_lam: int = 21,
    n_u: int = 50,
    *,
    seed: int = 0,
    rel_step: float = 1e-3,
    modes: int = 4,
    raise_on_violation: bool = True,
) -> SaddleProbe:
    """Sample both saddle inequalities of φ at (ũ, λ̃).

    φ(ũ, λ) <= φ(ũ, λ̃) + eps for λ in [λ̃/4, 4λ̃], and
    φ(ũ, λ̃) <= φ(v, λ̃) + eps for v = ũ + small perturbations, coarse
    random sine series, 0 and ũ itself.
    """
    branch = solution.branch if branch is None else branch
    rng = np.random.default_rng(seed)
    u = solution.u
    lam = solution.lam_tilde
    high = branch.limits()[1]
    lam_samples = np.geomspace(lam / 4, min(4 * lam, high), n_lam)
    lam_samples = np.sort(np.append(lam_samples, lam))

    def phi(v, x):
        return phi_aux(op, coeff, f, branch, v, x)

    center = phi(u, lam)
    eps = SADDLE_EPS * (1 + abs(center))
    phi_lam = np.array([phi(u, x) for x in lam_samples])

    umax = float(np.max(np.abs(u.values)))
    samples = [u, GridFunction.zeros(op.spec)]
    for _ in range(n_u):
        v = rng.standard_normal(len(u))
        v *= rel_step * umax / np.max(np.abs(v))
        samples.append(u.with_values(u.values + v))
    shape = (modes,) * op.spec.ndim
    for _ in range(n_u):
        v = sine_modes(op.spec, rng.standard_normal(shape))
        v *= rng.uniform(0, 2) * umax / np.max(np.abs(v))
        samples.append(u.with_values(v))
    phi_u = np.array([phi(v, lam) for v in samples])

    probe = SaddleProbe(
        lam_samples=lam_samples,
        u_samples=samples,
        phi_lam=phi_lam,
        phi_u=phi_u,
        phi_center=center,
        eps=eps,
        seed=seed,
    )
    log.info(
        "Saddle probe: lambda margin %.3g, u margin %.3g, eps %.3g",
        probe.lam_margin,
        probe.u_margin,
        eps,
    )
    if raise_on_violation and not probe.ok:
        raise SaddleViolation(
            f"Saddle inequality violated beyond eps={eps:.3g}",
            worst=probe.worst(),
        )
    return probe
