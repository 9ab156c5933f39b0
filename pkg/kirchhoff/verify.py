"""A posteriori checks of a computed Kirchhoff solution"""

# Built-in
import csv
import dataclasses
import logging
import math
import typing

# PyPI
import numpy as np

# Package
from kirchhoff.errors import KirchhoffError, NoCrossing, ValidationFailed
from kirchhoff.fixpoint import KirchhoffSolution, Route, Tolerances, solve
from kirchhoff.grid import (
    DiscreteLaplacian,
    DomainSpec,
    build_operators,
    continuum_eigenvalue,
    convergence_order,
    principal_eigenvalue,
)
from kirchhoff.kfun import KirchhoffBranch, TanBranch, validate_branch
from kirchhoff.sublinear import (
    Coefficient,
    Nonlinearity,
    PowerNonlinearity,
    frozen_functional,
    j_increases_along,
    solve_frozen,
)

log = logging.getLogger(__name__)

APRIORI_SLACK = 1e-8


class Apriori(typing.NamedTuple):
    lhs: float
    rhs: float
    ok: bool

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs


def apriori_rhs(coeff: Coefficient, q: float, lambda1: float) -> float:
    """[(2/(q+1))²·(ess sup α / λ₁)^(q+1)]^(1/(1−q))·∫α"""
    inner = (2 / (q + 1)) ** 2 * (coeff.ess_sup / lambda1) ** (q + 1)
    return inner ** (1 / (1 - q)) * coeff.integral


def check_apriori(
    sol: KirchhoffSolution, coeff: Coefficient, q: float, lambda1: float
) -> Apriori:
    """Compare K(t̃)^(2/(1−q))·t̃ with its explicit upper bound"""
    if not 0 < q < 1:
        raise ValueError(f"q must be in (0, 1): {q!r}")
    if not lambda1 > 0:
        raise ValueError(f"lambda1 must be positive: {lambda1!r}")
    lhs = sol.lam_tilde ** (2 / (1 - q)) * sol.t_tilde
    rhs = apriori_rhs(coeff, q, lambda1)
    return Apriori(lhs, rhs, lhs <= rhs * (1 + APRIORI_SLACK))


@dataclasses.dataclass(frozen=True)
class Minimization:
    ok: bool
    spread: float
    value: float
    perturbation_margin: float
    runs: int


def check_minimization(
    sol: KirchhoffSolution,
    op: DiscreteLaplacian,
    coeff: Coefficient,
    f: Nonlinearity,
    n_starts: int = 5,
    tol: float = 1e-8,
    *,
    n_perturb: int = 200,
    seed: int = 0,
    rel_step: float = 1e-3,
    tolerances: Tolerances = None,
) -> Minimization:
    """ũ is the global minimizer of u ↦ ½[K(t̃)Φ(u) − J(u)].

    The frozen problem at λ = K(t̃) is solved from n_starts random
    scalings of the supersolution. All runs must agree with ũ within
    tol, the value at ũ must be negative (so 0 is not the minimum) and
    below every sampled perturbation.
    """
    if n_starts < 5:
        raise ValueError(f"Need at least 5 starts, got {n_starts}")
    tolerances = Tolerances() if tolerances is None else tolerances
    rng = np.random.default_rng(seed)
    lam = sol.lam_tilde
    u = sol.u.values
    umax = float(np.max(np.abs(u)))
    value = frozen_functional(op, coeff, f, lam, sol.u)

    spread = 0.0
    runs_ok = True
    for scale in rng.uniform(1.0, 10.0, n_starts):
        run = solve_frozen(
            op,
            coeff,
            f,
            lam,
            tolerances.frozen,
            residual_tol=tolerances.residual,
            linear_tol=tolerances.linear,
            scale=float(scale),
        )
        diff = float(np.max(np.abs(run.u.values - u))) / umax
        spread = max(spread, diff)
        runs_ok &= frozen_functional(op, coeff, f, lam, run.u) < 0

    candidates = [1.01 * u]
    for _ in range(n_perturb):
        v = rng.standard_normal(len(u))
        candidates.append(u + rel_step * umax * v / np.max(np.abs(v)))
    margin = min(
        frozen_functional(op, coeff, f, lam, v) - value for v in candidates
    )
    ok = bool(spread <= tol and runs_ok and value < 0 and margin > 0)
    log.info(
        "Minimization: spread %.3g, value %.6g, margin %.3g",
        spread,
        value,
        margin,
    )
    return Minimization(ok, spread, value, margin, n_starts)


@dataclasses.dataclass(frozen=True)
class PositivityLocalization:
    positivity_ok: bool
    localization_ok: bool
    min_value: float
    boundary_distance: float

    def __bool__(self):
        return self.positivity_ok and self.localization_ok


def check_positivity_localization(
    sol: KirchhoffSolution,
) -> PositivityLocalization:
    """min ũ > 0 and t̃ strictly inside I"""
    min_value = float(np.min(sol.u.values))
    return PositivityLocalization(
        positivity_ok=min_value > 0,
        localization_ok=sol.branch.contains(sol.t_tilde),
        min_value=min_value,
        boundary_distance=sol.boundary_distance,
    )


# Report
# ------


@dataclasses.dataclass(frozen=True)
class VerificationReport:
    apriori_lhs: typing.Optional[float]
    apriori_rhs: typing.Optional[float]
    apriori_ok: bool
    minimization_ok: bool
    minimization_margin: float
    positivity_ok: bool
    localization_ok: bool
    multi_start_spread: float
    frozen_value: float
    zero_not_minimum_ok: bool
    j_unbounded_ok: bool
    lambda1: float
    lambda1_continuum: float
    seed: int
    notes: str = ""

    @property
    def apriori_ratio(self) -> typing.Optional[float]:
        if self.apriori_lhs is None:
            return None
        return self.apriori_lhs / self.apriori_rhs

    @property
    def ok(self) -> bool:
        return all(
            (
                self.apriori_ok,
                self.minimization_ok,
                self.positivity_ok,
                self.localization_ok,
                self.zero_not_minimum_ok,
                self.j_unbounded_ok,
            )
        )

    def failed(self) -> typing.List[str]:
        names = [
            "apriori_ok",
            "minimization_ok",
            "positivity_ok",
            "localization_ok",
            "zero_not_minimum_ok",
            "j_unbounded_ok",
        ]
        return [n for n in names if not getattr(self, n)]

    def as_dict(self) -> dict:
        return {
            "aprioriLhs": self.apriori_lhs,
            "aprioriRhs": self.apriori_rhs,
            "aprioriRatio": self.apriori_ratio,
            "aprioriOk": self.apriori_ok,
            "minimizationOk": self.minimization_ok,
            "minimizationMargin": self.minimization_margin,
            "positivityOk": self.positivity_ok,
            "localizationOk": self.localization_ok,
            "multiStartSpread": self.multi_start_spread,
            "frozenValue": self.frozen_value,
            "zeroNotMinimumOk": self.zero_not_minimum_ok,
            "jUnboundedOk": self.j_unbounded_ok,
            "lambda1": self.lambda1,
            "lambda1Continuum": self.lambda1_continuum,
            "seed": self.seed,
            "notes": self.notes,
            "ok": self.ok,
        }


def verify_solution(
    sol: KirchhoffSolution,
    op: DiscreteLaplacian,
    coeff: Coefficient,
    f: Nonlinearity,
    *,
    lambda1: float = None,
    tolerances: Tolerances = None,
    n_starts: int = 5,
    n_perturb: int = 200,
    seed: int = 0,
) -> VerificationReport:
    """Run every check and collect the results"""
    tolerances = Tolerances() if tolerances is None else tolerances
    if lambda1 is None:
        lambda1, _ = principal_eigenvalue(op)
    notes = list()
    if isinstance(f, PowerNonlinearity):
        apriori = check_apriori(sol, coeff, f.q, lambda1)
        lhs, rhs, apriori_ok = apriori
    else:
        lhs = rhs = None
        apriori_ok = True
        notes.append("a priori bound applies to f = xi^q only")
    minimization = check_minimization(
        sol,
        op,
        coeff,
        f,
        n_starts,
        tolerances.verify,
        n_perturb=n_perturb,
        seed=seed,
        tolerances=tolerances,
    )
    placement = check_positivity_localization(sol)
    report = VerificationReport(
        apriori_lhs=lhs,
        apriori_rhs=rhs,
        apriori_ok=bool(apriori_ok),
        minimization_ok=minimization.ok,
        minimization_margin=minimization.perturbation_margin,
        positivity_ok=placement.positivity_ok,
        localization_ok=placement.localization_ok,
        multi_start_spread=minimization.spread,
        frozen_value=minimization.value,
        zero_not_minimum_ok=minimization.value < 0,
        j_unbounded_ok=j_increases_along(op, coeff, f, sol.u),
        lambda1=lambda1,
        lambda1_continuum=continuum_eigenvalue(op.spec),
        seed=seed,
        notes="; ".join(notes),
    )
    if report.ok:
        log.info("Verification passed on %s", sol.branch.label)
    else:
        log.warning("Verification failed: %s", ", ".join(report.failed()))
    return report


# Survey
# ------


class SurveyRow(typing.NamedTuple):
    branch: str
    t_lo: float
    t_hi: float
    t_tilde: float
    lam_tilde: float
    apriori_lhs: float
    apriori_rhs: float
    status: str


SURVEY_HEADER = (
    "branch",
    "tLo",
    "tHi",
    "tTilde",
    "lamTilde",
    "aprioriLhs",
    "aprioriRhs",
    "status",
)


@dataclasses.dataclass(frozen=True)
class SurveyTable:
    rows: typing.Tuple[SurveyRow, ...]
    tolerance: float = 1e-8

    def solved(self) -> typing.List[SurveyRow]:
        return [r for r in self.rows if r.status == "OK"]

    @property
    def lhs_spread(self) -> float:
        """Relative spread of the a priori lhs over solved rows"""
        lhs = [r.apriori_lhs for r in self.solved()]
        lhs = [x for x in lhs if not math.isnan(x)]
        if len(lhs) < 2:
            return 0.0
        return (max(lhs) - min(lhs)) / abs(np.mean(lhs))

    @property
    def invariance_ok(self) -> bool:
        return self.lhs_spread <= self.tolerance

    @property
    def distinct_ok(self) -> bool:
        """Solved tan rows have pairwise distinct t̃"""
        t = sorted(r.t_tilde for r in self.solved() if r.branch.startswith("tan:"))
        return all(b - a > self.tolerance * max(1, b) for a, b in zip(t, t[1:]))

    @property
    def has_invalid(self) -> bool:
        return any(r.status == "INVALID" for r in self.rows)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as file:
            writer = csv.writer(file)
            writer.writerow(SURVEY_HEADER)
            for row in self.rows:
                writer.writerow([_csv_value(x) for x in row])


def _csv_value(x):
    if isinstance(x, float):
        return repr(x)
    return x


def cross_branch_survey(
    op: DiscreteLaplacian,
    coeff: Coefficient,
    f: Nonlinearity,
    branches: typing.Sequence[KirchhoffBranch],
    *,
    route: Route = Route.AUTO,
    tolerances: Tolerances = None,
    lambda1: float = None,
    samples: int = 64,
) -> SurveyTable:
    """Solve on every branch and tabulate t̃, λ̃ and the a priori sides.

    Branches failing validation are marked INVALID, branches without a
    root NO_CROSSING and other solver failures by their error name.
    """
    tolerances = Tolerances() if tolerances is None else tolerances
    power = isinstance(f, PowerNonlinearity)
    extra = dict()
    rhs = math.nan
    if branches and power:
        if lambda1 is None:
            lambda1, _ = principal_eigenvalue(op)
        rhs = apriori_rhs(coeff, f.q, lambda1)
        if Route(route) is not Route.LAMBDA_BISECT:
            extra["base"] = solve_frozen(
                op,
                coeff,
                f,
                1.0,
                tolerances.frozen,
                residual_tol=tolerances.residual,
                linear_tol=tolerances.linear,
            )
    rows = list()
    for branch in branches:
        lo, hi = branch.interval
        blank = SurveyRow(
            branch.label, lo, hi, math.nan, math.nan, math.nan, rhs, ""
        )
        if not validate_branch(branch, samples).ok:
            rows.append(blank._replace(status="INVALID"))
            log.warning("Branch %s failed validation", branch.label)
            continue
        try:
            sol = solve(op, coeff, f, branch, route, tolerances, **extra)
        except NoCrossing as error:
            log.warning("No crossing on %s: %s", branch.label, error)
            rows.append(blank._replace(status="NO_CROSSING"))
            continue
        except ValidationFailed:
            raise
        except KirchhoffError as error:
            log.warning("Solve failed on %s: %s", branch.label, error)
            rows.append(blank._replace(status=type(error).__name__))
            continue
        lhs = (
            sol.lam_tilde ** (2 / (1 - f.q)) * sol.t_tilde
            if power
            else math.nan
        )
        rows.append(
            blank._replace(
                t_tilde=sol.t_tilde,
                lam_tilde=sol.lam_tilde,
                apriori_lhs=lhs,
                status="OK",
            )
        )
    return SurveyTable(tuple(rows), tolerances.verify)


def tan_branches(count: int) -> typing.List[TanBranch]:
    return [TanBranch(k) for k in range(1, count + 1)]


# Refinement
# ----------


@dataclasses.dataclass(frozen=True)
class RefinementStudy:
    resolutions: typing.Tuple[typing.Tuple[int, ...], ...]
    t_values: typing.Tuple[float, ...]
    order: float


def refinement_study(
    spec: DomainSpec,
    coefficient: typing.Callable[[DomainSpec], Coefficient],
    f: Nonlinearity,
    branch: KirchhoffBranch,
    *,
    route: Route = Route.AUTO,
    tolerances: Tolerances = None,
) -> RefinementStudy:
    """t̃ on the given grid and two successive halvings of the mesh width"""
    specs = [spec, spec.refined(), spec.refined().refined()]
    values = list()
    for s in specs:
        op = build_operators(s)
        sol = solve(op, coefficient(s), f, branch, route, tolerances)
        values.append(sol.t_tilde)
        log.info("Refinement %s: t=%.12g", s.resolution, sol.t_tilde)
    return RefinementStudy(
        tuple(s.resolution for s in specs),
        tuple(values),
        convergence_order(values),
    )
