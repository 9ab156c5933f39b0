"""High level workflows behind the command line interface"""

# Built-in
import dataclasses
import logging
import pathlib
import typing

# Package
import kirchhoff
from kirchhoff.config import RunConfig
from kirchhoff.errors import (
    ExitCode,
    InvalidBranch,
    InvalidNonlinearity,
    KirchhoffError,
    SaddleViolation,
)
from kirchhoff.fixpoint import KirchhoffSolution, saddle_probe, solve
from kirchhoff.grid import (
    DiscreteLaplacian,
    DomainSpec,
    Kind,
    build_operators,
    principal_eigenvalue,
)
from kirchhoff.kfun import BranchValidationReport, KirchhoffBranch, validate_branch
from kirchhoff.oracle import closed_form_t1, oracle_shoot
from kirchhoff.report import Stopwatch, write_json
from kirchhoff.sublinear import (
    Coefficient,
    Nonlinearity,
    NonlinearityReport,
    PowerNonlinearity,
    validate_nonlinearity,
)
from kirchhoff.verify import cross_branch_survey, verify_solution

log = logging.getLogger(__name__)

TOOL = __package__
SOLUTION_CSV = "solution.csv"
REPORT_JSON = "report.json"
SURVEY_CSV = "survey.csv"
ORACLE_JSON = "oracle.json"


@dataclasses.dataclass
class Outcome:
    exit_code: ExitCode
    report: dict
    paths: typing.List[pathlib.Path] = dataclasses.field(default_factory=list)
    table: typing.Any = None


@dataclasses.dataclass(eq=False)
class Problem:
    """Discrete problem data built from a RunConfig"""

    spec: DomainSpec
    op: DiscreteLaplacian
    coeff: Coefficient
    f: Nonlinearity
    f_report: NonlinearityReport
    branch: typing.Optional[KirchhoffBranch] = None
    branch_report: typing.Optional[BranchValidationReport] = None

    @property
    def q(self) -> typing.Optional[float]:
        return self.f.q if isinstance(self.f, PowerNonlinearity) else None

    def checks(self) -> dict:
        checks = {
            "domain": {**self.spec.as_dict(), "ok": True},
            "coefficient": {
                "label": self.coeff.label,
                "essSup": self.coeff.ess_sup,
                "integral": self.coeff.integral,
                "ok": True,
            },
            "nonlinearity": {"label": self.f.label, **self.f_report.as_dict()},
        }
        if self.branch is not None:
            checks["branch"] = {
                "label": self.branch.label,
                **self.branch_report.as_dict(),
            }
        return checks

    def ensure_valid(self):
        if not self.f_report.ok:
            raise InvalidNonlinearity(
                f"{self.f.label} is not sublinear: {self.f_report.as_dict()}"
            )
        if self.branch_report is not None and not self.branch_report.ok:
            raise InvalidBranch(
                f"{self.branch.label} is not positive and increasing on I"
            )


def build_problem(config: RunConfig, with_branch: bool = True) -> Problem:
    """Construct and validate the problem data, ValidationFailed on error"""
    spec = config.domain
    op = build_operators(spec)
    coeff = config.make_coefficient(spec)
    f = config.make_nonlinearity()
    problem = Problem(spec, op, coeff, f, validate_nonlinearity(f))
    if with_branch:
        problem.branch = config.make_branch()
        problem.branch_report = validate_branch(problem.branch)
    return problem


def base_report(config: RunConfig) -> dict:
    return {
        "tool": TOOL,
        "version": kirchhoff.__version__,
        "config_hash": config.config_hash,
        "seed": config.seed,
        "grid": config.domain.as_dict(),
        "route": config.route.value,
        "tolerances": config.tolerances.as_dict(),
    }


def diagnostics_of(error: KirchhoffError) -> dict:
    diagnostics = {"message": str(error), "exitCode": int(error.exit_code)}
    for name in ("diagnostics", "worst", "iterations"):
        value = getattr(error, name, None)
        if value:
            diagnostics[name] = value
    return diagnostics


def oracle_block(config: RunConfig, problem: Problem, sol: KirchhoffSolution):
    """Compare Φ(u₁) of the run with the 1D reference values"""
    mode = config.oracle
    kind = config.alpha.get("kind", "constant").strip().lower()
    if mode == "none":
        return {"mode": mode}
    if problem.spec.kind is not Kind.INTERVAL or problem.q is None:
        return {"mode": mode, "skipped": "needs an interval and f = xi^q"}
    if kind != "constant":
        return {"mode": mode, "skipped": "needs a constant coefficient"}
    q = problem.q
    alpha = float(config.alpha.get("value", 1))
    (length,) = problem.spec.lengths
    discrete = sol.lam_tilde ** (2 / (1 - q)) * sol.t_tilde
    block = {
        "mode": mode,
        "q": q,
        "alpha": alpha,
        "length": length,
        "t1Discrete": discrete,
        "t1ClosedForm": closed_form_t1(q, alpha, length),
    }
    reference = block["t1ClosedForm"]
    if mode == "shoot":
        shot = oracle_shoot(q, alpha, length, config.oracle_fine_n)
        block["t1Shooting"] = shot.t1
        block["shooting"] = shot.as_dict()
        reference = shot.t1
    block["relativeError"] = abs(discrete - reference) / reference
    return block


def run(config: RunConfig) -> Outcome:
    """Validate, solve, verify and write solution.csv and report.json"""
    watch = Stopwatch()
    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    report = base_report(config)
    outcome = Outcome(ExitCode.OK, report)
    tol = config.tolerances
    try:
        with watch("setup"):
            problem = build_problem(config)
        report["branch"] = problem.branch.as_dict()
        report["q"] = problem.q
        report["checks"] = problem.checks()
        problem.ensure_valid()
        op, coeff, f = problem.op, problem.coeff, problem.f

        with watch("eigen"):
            lambda1, _ = principal_eigenvalue(op, linear_tol=tol.linear)
        report["grid"]["lambda1"] = lambda1

        with watch("solve"):
            sol = solve(op, coeff, f, problem.branch, config.route, tol)
        report.update(
            {
                "tTilde": sol.t_tilde,
                "lamTilde": sol.lam_tilde,
                "kirchhoffResidual": sol.kirchhoff_residual,
                "innerSolves": sol.inner_solves,
                "innerIterations": sol.inner_iterations,
                "route": sol.route.value,
                "localizationError": sol.localization_error,
                "boundaryDistance": sol.boundary_distance,
                "localizationOk": problem.branch.contains(sol.t_tilde),
            }
        )
        path = out / SOLUTION_CSV
        sol.u.to_csv(path)
        outcome.paths.append(path)

        with watch("verify"):
            verification = verify_solution(
                sol,
                op,
                coeff,
                f,
                lambda1=lambda1,
                tolerances=tol,
                n_starts=config.verify_starts,
                n_perturb=config.verify_perturbations,
                seed=config.seed,
            )
        report["verify"] = verification.as_dict()

        probe = None
        if config.saddle:
            with watch("saddle"):
                probe = saddle_probe(
                    sol,
                    op,
                    coeff,
                    f,
                    n_lam=config.saddle_lambda_samples,
                    n_u=config.saddle_perturbations,
                    seed=config.seed,
                    raise_on_violation=False,
                )
            report["saddle"] = probe.as_dict()
        else:
            report["saddle"] = {"skipped": True}

        with watch("oracle"):
            report["oracle"] = oracle_block(config, problem, sol)

        if probe is not None and not probe.ok:
            raise SaddleViolation(
                "Saddle inequality violated beyond the noise level",
                worst=probe.worst(),
            )
        if verification.ok:
            report["status"] = "OK"
        else:
            report["status"] = "VerificationFailed"
            report["diagnostics"] = {
                "message": "Failed checks: " + ", ".join(verification.failed()),
                "exitCode": int(ExitCode.VERIFICATION_FAILED),
            }
            outcome.exit_code = ExitCode.VERIFICATION_FAILED
    except KirchhoffError as error:
        log.error("%s: %s", type(error).__name__, error)
        report["status"] = type(error).__name__
        report["diagnostics"] = diagnostics_of(error)
        outcome.exit_code = error.exit_code
    report["timings"] = watch.timings
    outcome.paths.append(write_json(out / REPORT_JSON, report))
    return outcome


def validate(config: RunConfig) -> Outcome:
    """Check domain, coefficient, nonlinearity and branch"""
    report = base_report(config)
    problem = build_problem(config)
    report["checks"] = problem.checks()
    ok = problem.f_report.ok and problem.branch_report.ok
    report["status"] = "OK" if ok else "INVALID"
    code = ExitCode.OK if ok else ExitCode.VALIDATION_FAILED
    return Outcome(code, report)


def survey(config: RunConfig, forms: typing.Sequence[str] = None) -> Outcome:
    """Solve on every listed branch and write survey.csv"""
    problem = build_problem(config, with_branch=False)
    problem.ensure_valid()
    branches = config.make_survey_branches(forms)
    table = cross_branch_survey(
        problem.op,
        problem.coeff,
        problem.f,
        branches,
        route=config.route,
        tolerances=config.tolerances,
        samples=config.survey_samples,
    )
    config.output_dir.mkdir(parents=True, exist_ok=True)
    path = config.output_dir / SURVEY_CSV
    table.to_csv(path)
    report = {
        "rows": len(table.rows),
        "lhsSpread": table.lhs_spread,
        "invarianceOk": table.invariance_ok,
        "distinctOk": table.distinct_ok,
    }
    code = ExitCode.VALIDATION_FAILED if table.has_invalid else ExitCode.OK
    return Outcome(code, report, [path], table)


def oracle(
    q: float,
    alpha: float = 1.0,
    length: float = 1.0,
    fine_n: int = 8192,
    output_dir=None,
) -> Outcome:
    """Shooting and closed-form t₁, written to oracle.json"""
    shot = oracle_shoot(q, alpha, length, fine_n)
    closed = closed_form_t1(q, alpha, length)
    report = {
        "tool": TOOL,
        "version": kirchhoff.__version__,
        "t1Shooting": shot.t1,
        "t1ClosedForm": closed,
        "relativeError": abs(shot.t1 - closed) / closed,
        "shooting": shot.as_dict(),
    }
    outcome = Outcome(ExitCode.OK, report)
    if output_dir is not None:
        outcome.paths.append(
            write_json(pathlib.Path(output_dir) / ORACLE_JSON, report)
        )
    return outcome
