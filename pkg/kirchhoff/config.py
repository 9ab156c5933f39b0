"""Run configuration read from a YAML file

See docs/configuration.rst for the schema. Relative paths inside the
file are resolved against the directory of the file.
"""

# Built-in
import dataclasses
import hashlib
import json
import os
import pathlib
import re
import typing

# PyPI
import yaml

# Package
from kirchhoff.errors import InvalidConfig
from kirchhoff.fixpoint import Route, Tolerances
from kirchhoff.grid import DomainSpec, Kind
from kirchhoff.kfun import KirchhoffBranch, branch_from_mapping, parse_branch
from kirchhoff.sublinear import (
    Coefficient,
    Nonlinearity,
    coefficient_from_mapping,
    nonlinearity_from_mapping,
)

PKG = __package__.upper()
OUTPUT_DIR_VARIABLE = f"{PKG}_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "output"
ORACLE_MODES = ("none", "closed", "shoot")
SECTIONS = (
    "domain",
    "alpha",
    "nonlinearity",
    "branch",
    "solver",
    "survey",
    "output",
)
BOOLEANS = {
    "true": True,
    "yes": True,
    "on": True,
    "1": True,
    "false": False,
    "no": False,
    "off": False,
    "0": False,
}


def split_list(text: str) -> typing.List[str]:
    """Items separated by commas, whitespace or newlines"""
    return [item for item in re.split(r"[,\s]+", text.strip()) if item]


def flat_section(name: str, section) -> typing.Dict[str, str]:
    """Section values as strings, lists joined by commas.

    Nested mappings are rejected, every section is a flat key-value
    block.
    """
    if section is None:
        return dict()
    if not isinstance(section, dict):
        raise InvalidConfig(f"Section {name!r} must be a mapping")
    flat = dict()
    for key, value in section.items():
        if value is None:
            continue
        if isinstance(value, dict):
            raise InvalidConfig(f"Nested value in section {name!r}: {key}")
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, (list, tuple)):
            value = ", ".join(str(item) for item in value)
        flat[str(key)] = str(value)
    return flat


def default_output_dir(configured=None) -> pathlib.Path:
    """KIRCHHOFF_OUTPUT_DIR, then the configured value, then ./output"""
    env = os.environ.get(OUTPUT_DIR_VARIABLE)
    if env:
        return pathlib.Path(env)
    if configured:
        return pathlib.Path(configured)
    return pathlib.Path(DEFAULT_OUTPUT_DIR)


def domain_from_section(section) -> DomainSpec:
    """Build a DomainSpec from the domain section"""
    try:
        kind = Kind(section.get("kind", "interval").strip().lower())
    except ValueError:
        raise InvalidConfig(
            f"Unknown domain kind: {section.get('kind')!r}"
        ) from None
    ndim = 1 if kind is Kind.INTERVAL else 2
    key = "length" if "length" in section else "lengths"
    try:
        lengths = [float(x) for x in split_list(section.get(key, "1"))]
        resolution = [int(x) for x in split_list(section.get("resolution", ""))]
    except ValueError as error:
        raise InvalidConfig(f"Bad domain entry: {error}") from None
    if len(lengths) == 1:
        lengths *= ndim
    if len(resolution) == 1:
        resolution *= ndim
    return DomainSpec(kind, tuple(lengths), tuple(resolution))


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one run.

    The alpha, nonlinearity and branch sections are kept as plain
    mappings and turned into objects on demand, since the coefficient
    depends on the grid.
    """

    domain: DomainSpec
    alpha: typing.Dict[str, str]
    nonlinearity: typing.Dict[str, str]
    branch: typing.Dict[str, str]
    route: Route = Route.AUTO
    tolerances: Tolerances = Tolerances()
    seed: int = 0
    output_dir: pathlib.Path = pathlib.Path(DEFAULT_OUTPUT_DIR)
    base_dir: pathlib.Path = pathlib.Path(".")
    survey_branches: typing.Tuple[str, ...] = ()
    survey_samples: int = 64
    saddle: bool = True
    saddle_lambda_samples: int = 21
    saddle_perturbations: int = 50
    verify_starts: int = 5
    verify_perturbations: int = 200
    oracle: str = "closed"
    oracle_fine_n: int = 8192

    def __post_init__(self):
        object.__setattr__(self, "route", Route(self.route))
        object.__setattr__(self, "output_dir", pathlib.Path(self.output_dir))
        object.__setattr__(self, "base_dir", pathlib.Path(self.base_dir))
        if self.oracle not in ORACLE_MODES:
            raise InvalidConfig(
                f"oracle must be one of {', '.join(ORACLE_MODES)}: "
                f"{self.oracle!r}"
            )
        family = self.nonlinearity.get("family", "power").strip().lower()
        if self.route is Route.T_EQUATION and family != "power":
            raise InvalidConfig(
                f"route=t requires a power nonlinearity, got {family!r}"
            )
        if self.verify_starts < 5:
            raise InvalidConfig("solver starts must be at least 5")
        for name in ("saddle_lambda_samples", "saddle_perturbations"):
            if getattr(self, name) < 1:
                raise InvalidConfig(f"{name} must be positive")

    @classmethod
    def from_file(cls, path, output_dir=None) -> "RunConfig":
        path = pathlib.Path(path)
        try:
            with open(path, encoding="utf-8") as file:
                document = yaml.safe_load(file)
        except OSError as error:
            raise InvalidConfig(f"Cannot read config {path}: {error}") from None
        except yaml.YAMLError as error:
            raise InvalidConfig(f"Malformed config {path}: {error}") from None
        return cls.from_document(document, path.parent, output_dir)

    @classmethod
    def from_string(cls, text: str, base_dir=".", output_dir=None):
        try:
            document = yaml.safe_load(text)
        except yaml.YAMLError as error:
            raise InvalidConfig(f"Malformed config: {error}") from None
        return cls.from_document(document, base_dir, output_dir)

    @classmethod
    def from_document(cls, document, base_dir, output_dir=None) -> "RunConfig":
        """Build from the loaded YAML, a mapping of flat sections"""
        if document is None:
            document = dict()
        if not isinstance(document, dict):
            raise InvalidConfig("Config must be a mapping of sections")
        unknown = set(map(str, document)) - set(SECTIONS)
        if unknown:
            raise InvalidConfig(f"Unknown sections: {', '.join(sorted(unknown))}")
        for name in ("domain", "nonlinearity", "branch"):
            if name not in document:
                raise InvalidConfig(f"Missing section {name!r}")

        def section(name):
            return flat_section(name, document.get(name))

        solver = section("solver")
        survey = section("survey")
        if output_dir is None:
            configured = section("output").get("dir")
            if configured:
                configured = pathlib.Path(base_dir) / configured
            output_dir = default_output_dir(configured)
        try:
            route = Route(solver.get("route", "auto").strip().lower())
        except ValueError:
            raise InvalidConfig(
                f"Unknown route: {solver.get('route')!r}"
            ) from None
        try:
            return cls(
                domain=domain_from_section(section("domain")),
                alpha=section("alpha"),
                nonlinearity=section("nonlinearity"),
                branch=section("branch"),
                route=route,
                tolerances=Tolerances.from_section(solver),
                seed=int(solver.get("seed", 0)),
                output_dir=output_dir,
                base_dir=base_dir,
                survey_branches=tuple(split_list(survey.get("branches", ""))),
                survey_samples=int(survey.get("samples", 64)),
                saddle=_boolean(solver, "saddle", True),
                saddle_lambda_samples=int(solver.get("saddle_lambdas", 21)),
                saddle_perturbations=int(
                    solver.get("saddle_perturbations", 50)
                ),
                verify_starts=int(solver.get("starts", 5)),
                verify_perturbations=int(solver.get("perturbations", 200)),
                oracle=solver.get("oracle", "closed").strip().lower(),
                oracle_fine_n=int(solver.get("oracle_fine_n", 8192)),
            )
        except ValueError as error:
            raise InvalidConfig(f"Bad solver or survey entry: {error}") from None

    def make_coefficient(self, spec: DomainSpec = None) -> Coefficient:
        spec = self.domain if spec is None else spec
        return coefficient_from_mapping(spec, self.alpha, self.base_dir)

    def make_nonlinearity(self) -> Nonlinearity:
        return nonlinearity_from_mapping(self.nonlinearity, self.base_dir)

    def make_branch(self) -> KirchhoffBranch:
        if "spec" in self.branch:
            return parse_branch(self.branch["spec"], self.base_dir)
        return branch_from_mapping(self.branch, self.base_dir)

    def make_survey_branches(self, forms=None) -> typing.List[KirchhoffBranch]:
        forms = self.survey_branches if forms is None else forms
        return [parse_branch(form, self.base_dir) for form in forms]

    def canonical(self) -> dict:
        """Config content that determines the results"""
        return {
            "domain": self.domain.as_dict(),
            "alpha": dict(sorted(self.alpha.items())),
            "nonlinearity": dict(sorted(self.nonlinearity.items())),
            "branch": dict(sorted(self.branch.items())),
            "route": self.route.value,
            "tolerances": self.tolerances.as_dict(),
            "seed": self.seed,
            "survey": {
                "branches": list(self.survey_branches),
                "samples": self.survey_samples,
            },
            "saddle": {
                "enabled": self.saddle,
                "lambdaSamples": self.saddle_lambda_samples,
                "perturbations": self.saddle_perturbations,
            },
            "verify": {
                "starts": self.verify_starts,
                "perturbations": self.verify_perturbations,
            },
            "oracle": {"mode": self.oracle, "fineN": self.oracle_fine_n},
        }

    @property
    def config_hash(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def with_seed(self, seed: int) -> "RunConfig":
        return dataclasses.replace(self, seed=seed)


def _boolean(section, key, default):
    if key not in section:
        return default
    try:
        return BOOLEANS[section[key].strip().lower()]
    except KeyError:
        raise InvalidConfig(f"Bad boolean {key}: {section[key]!r}") from None
