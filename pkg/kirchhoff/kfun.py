"""Kirchhoff functions restricted to a monotone branch

A branch is an open interval I on which K is positive and strictly
increasing. Ψ⁻¹ is the inverse of K on I, extended to [0, inf K] by
the constant inf I so that it is continuous and nondecreasing on
[0, sup K).
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
import scipy.integrate

# Package
from kirchhoff.errors import (
    InvalidBranch,
    InvalidConfig,
    OutOfBranch,
    OutOfRange,
)
from kirchhoff.roots import bisect_increasing

log = logging.getLogger(__name__)

CLOSED_FORM_TOL = 1e-12
TABLE_TOL = 1e-10
RANGE_LOW = 1e-6
RANGE_HIGH = 1e6
QUAD_EPSREL = 1e-8


class KirchhoffBranch(abc.ABC):
    """K restricted to the open interval I = (t_lo, t_hi)"""

    family: typing.ClassVar[str] = ""
    bisect_tol: typing.ClassVar[float] = CLOSED_FORM_TOL

    @property
    @abc.abstractmethod
    def interval(self) -> typing.Tuple[float, float]:
        """Open branch interval (t_lo, t_hi), t_hi may be +inf"""

    @abc.abstractmethod
    def __call__(self, t):
        """Evaluate K elementwise without checking membership of I"""

    @abc.abstractmethod
    def limits(self) -> typing.Tuple[float, float]:
        """(inf K, sup K) over I"""

    @property
    @abc.abstractmethod
    def label(self) -> str:
        """Compact string form, see parse_branch"""

    def antiderivative(self, lam: float) -> typing.Optional[float]:
        """Closed form of ∫₀^λ Ψ⁻¹, None when not available"""
        return None

    @property
    def t_lo(self) -> float:
        return self.interval[0]

    @property
    def t_hi(self) -> float:
        return self.interval[1]

    @property
    def range_full(self) -> bool:
        """True when K(I) = (0, +inf)"""
        low, high = self.limits()
        return low == 0 and high == math.inf

    def contains(self, t: float) -> bool:
        return self.t_lo < t < self.t_hi

    def as_dict(self) -> dict:
        low, high = self.limits()
        return {
            "family": self.family,
            "label": self.label,
            "tLo": self.t_lo,
            "tHi": _finite_or_str(self.t_hi),
            "kLow": low,
            "kHigh": _finite_or_str(high),
            "rangeFull": self.range_full,
        }

    def __str__(self):
        return self.label


def _finite_or_str(x: float):
    return x if math.isfinite(x) else str(x)


def _g(x: float) -> str:
    return format(x, "g")


@dataclasses.dataclass(frozen=True)
class TanBranch(KirchhoffBranch):
    """K(t) = tan t on ((k−1)π, (k−1)π + π/2)"""

    k: int
    family: typing.ClassVar[str] = "tan"

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise InvalidBranch(f"Tan branch index must be >= 1: {self.k!r}")
        object.__setattr__(self, "k", int(self.k))

    @property
    def interval(self):
        start = (self.k - 1) * math.pi
        return start, start + math.pi / 2

    def __call__(self, t):
        return np.tan(t)

    def limits(self):
        return 0.0, math.inf

    @property
    def label(self):
        return f"tan:{self.k}"

    def antiderivative(self, lam):
        return (
            (self.k - 1) * math.pi * lam
            + lam * math.atan(lam)
            - 0.5 * math.log1p(lam * lam)
        )


@dataclasses.dataclass(frozen=True)
class LogBranch(KirchhoffBranch):
    """K(t) = log t on (1, +inf)"""

    family: typing.ClassVar[str] = "log"

    @property
    def interval(self):
        return 1.0, math.inf

    def __call__(self, t):
        return np.log(t)

    def limits(self):
        return 0.0, math.inf

    @property
    def label(self):
        return "log"

    def antiderivative(self, lam):
        try:
            return math.expm1(lam)
        except OverflowError:
            return math.inf


@dataclasses.dataclass(frozen=True)
class SingularPowerBranch(KirchhoffBranch):
    """K(t) = |c − t|^(−s) on (t_lo, c).

    The default window starts at 0. Its infimum c^(−s) is positive so
    the range is never full.
    """

    c: float
    s: float
    t_lo: float = 0.0
    family: typing.ClassVar[str] = "singular"

    def __post_init__(self):
        if not (math.isfinite(self.c) and self.c > 0):
            raise InvalidBranch(f"Singular pole must be positive: {self.c!r}")
        if not 0 < self.s < 1:
            raise InvalidBranch(f"Singular exponent must be in (0, 1): {self.s!r}")
        if not 0 <= self.t_lo < self.c:
            raise InvalidBranch(
                f"Window start must lie in [0, c): {self.t_lo!r}"
            )

    @property
    def interval(self):
        return float(self.t_lo), float(self.c)

    def __call__(self, t):
        with np.errstate(divide="ignore"):
            return np.abs(self.c - np.asarray(t, float)) ** (-self.s)

    def limits(self):
        return (self.c - self.t_lo) ** (-self.s), math.inf

    @property
    def label(self):
        parts = ["singular", _g(self.c), _g(self.s)]
        if self.t_lo:
            parts.append(_g(self.t_lo))
        return ":".join(parts)


@dataclasses.dataclass(frozen=True)
class AffineBranch(KirchhoffBranch):
    """K(t) = a·t + b on (0, +inf)"""

    a: float
    b: float = 0.0
    family: typing.ClassVar[str] = "affine"

    def __post_init__(self):
        if self.a < 0 or self.b < 0 or (self.a == 0 and self.b == 0):
            raise InvalidBranch(
                f"Affine needs a >= 0, b >= 0, not both zero: "
                f"a={self.a!r}, b={self.b!r}"
            )

    @property
    def interval(self):
        return 0.0, math.inf

    def __call__(self, t):
        return self.a * np.asarray(t, float) + self.b

    def limits(self):
        return float(self.b), math.inf if self.a > 0 else float(self.b)

    @property
    def label(self):
        return f"affine:{_g(self.a)}:{_g(self.b)}"

    def antiderivative(self, lam):
        if self.a == 0:
            return None
        excess = max(lam - self.b, 0.0)
        return excess * excess / (2 * self.a)


@dataclasses.dataclass(frozen=True)
class TableBranch(KirchhoffBranch):
    """K sampled at increasing t, linearly interpolated.

    The branch interval is (t[0], t[-1]). Monotonicity of the K
    column is left to validate_branch.
    """

    t: typing.Tuple[float, ...]
    k: typing.Tuple[float, ...]
    source: str = "custom"
    family: typing.ClassVar[str] = "table"
    bisect_tol: typing.ClassVar[float] = TABLE_TOL

    def __post_init__(self):
        t = tuple(float(x) for x in self.t)
        k = tuple(float(x) for x in self.k)
        if len(t) != len(k) or len(t) < 2:
            raise InvalidBranch(
                "Table needs at least two (t, K) rows of equal length"
            )
        if not np.all(np.isfinite(t)) or not np.all(np.isfinite(k)):
            raise InvalidBranch("Table holds non-finite values")
        if np.any(np.diff(t) <= 0):
            raise InvalidBranch("Table t column must be strictly increasing")
        if t[0] < 0:
            raise InvalidBranch("Table t column must be nonnegative")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "k", k)

    @classmethod
    def from_csv(cls, path) -> "TableBranch":
        """Two columns t, K; '#' comments and a text header are skipped"""
        path = pathlib.Path(path)
        try:
            table = np.genfromtxt(path, delimiter=",", comments="#", ndmin=2)
        except OSError as error:
            raise InvalidConfig(f"Cannot read branch table: {error}") from None
        table = table[~np.isnan(table).any(axis=1)]
        if table.ndim != 2 or table.shape[1] != 2:
            raise InvalidBranch(f"{path.name}: expected two columns (t, K)")
        return cls(tuple(table[:, 0]), tuple(table[:, 1]), str(path))

    @property
    def interval(self):
        return self.t[0], self.t[-1]

    def __call__(self, t):
        return np.interp(t, self.t, self.k)

    def limits(self):
        return min(self.k), max(self.k)

    @property
    def label(self):
        return f"table:{self.source}"


# Operations
# ----------


def eval_k(branch: KirchhoffBranch, t: float) -> float:
    """K(t) for t inside the open branch interval"""
    if not branch.contains(t):
        lo, hi = branch.interval
        raise OutOfBranch(f"t={t!r} is outside {branch.label} I=({lo}, {hi})")
    return float(branch(t))


def psi_inverse(branch: KirchhoffBranch, lam: float, tol: float = None):
    """Ψ⁻¹(λ): the t in closure(I) with K(t) = λ.

    Found by bisection on t. The iteration stops when
    |K(t) − λ| <= tol·max(1, λ) or when the bracket cannot be split
    further in floating point. λ = 0 maps to inf I.
    """
    tol = branch.bisect_tol if tol is None else tol
    lo, hi = branch.interval
    if lam == 0:
        return lo
    low, high = branch.limits()
    if not (lam > 0 and low <= lam <= high) or lam == math.inf:
        raise OutOfRange(
            f"lambda={lam!r} is not attained on {branch.label}, "
            f"K(I) = ({low:g}, {high:g})"
        )
    if lam == low:
        return lo
    if lam == high:
        return hi
    if math.isinf(hi):
        # Expand the bracket by doubling until K(hi) >= λ
        hi = max(1.0, 2 * lo)
        while branch(hi) < lam:
            lo, hi = hi, 2 * hi
            if math.isinf(hi):
                raise OutOfRange(
                    f"lambda={lam!r} on {branch.label} needs t beyond "
                    "floating point range"
                )
        flo = float(branch(lo)) - lam if lo > branch.t_lo else low - lam
    else:
        flo = low - lam
    root = bisect_increasing(
        lambda t: float(branch(t)) - lam,
        lo,
        hi,
        xtol=0.0,
        ftol=tol * max(1.0, lam),
        flo=flo,
        fhi=high - lam if hi == branch.t_hi else None,
    )
    return root.x


def psi_inverse_extended(
    branch: KirchhoffBranch, lam: float, tol: float = None
) -> float:
    """Ψ⁻¹ continued by inf I on [0, inf K]"""
    if lam < 0:
        raise OutOfRange(f"lambda must be nonnegative: {lam!r}")
    if lam <= branch.limits()[0]:
        return branch.t_lo
    return psi_inverse(branch, lam, tol)


def integral_psi_inverse(branch: KirchhoffBranch, lam: float) -> float:
    """Q(λ) = ∫₀^λ Ψ⁻¹ of the extended inverse"""
    if lam < 0:
        raise OutOfRange(f"lambda must be nonnegative: {lam!r}")
    if lam == 0:
        return 0.0
    closed = branch.antiderivative(lam)
    if closed is not None:
        return closed
    low, high = branch.limits()
    if lam > high:
        raise OutOfRange(
            f"lambda={lam!r} exceeds sup K = {high:g} on {branch.label}"
        )
    flat = branch.t_lo * min(lam, low)
    if lam <= low:
        return flat
    points = None
    if isinstance(branch, TableBranch):
        points = [x for x in branch.k if low < x < lam] or None
    value, error = scipy.integrate.quad(
        lambda mu: psi_inverse(branch, mu),
        low,
        lam,
        epsrel=QUAD_EPSREL,
        points=points,
        limit=200,
    )
    log.debug("Quadrature of psi inverse: %g +- %g", value, error)
    return flat + value


# Validation
# ----------


@dataclasses.dataclass(frozen=True)
class BranchValidationReport:
    monotone_ok: bool
    positive_ok: bool
    range_low: float
    range_high: float
    range_high_unbounded: bool
    range_full: bool
    samples: int

    @property
    def ok(self) -> bool:
        return self.monotone_ok and self.positive_ok

    def as_dict(self) -> dict:
        return {
            "monotoneOk": self.monotone_ok,
            "positiveOk": self.positive_ok,
            "rangeLow": self.range_low,
            "rangeHigh": _finite_or_str(self.range_high),
            "rangeHighUnbounded": self.range_high_unbounded,
            "rangeFull": self.range_full,
            "samples": self.samples,
            "ok": self.ok,
        }


def sample_points(branch: KirchhoffBranch, samples: int) -> np.ndarray:
    """Geometric clusters at both ends of I plus a uniform core"""
    lo, hi = branch.interval
    n_geo = samples // 4
    if math.isinf(hi):
        scale = max(1.0, lo)
        near = lo + scale * np.geomspace(1e-12, 1.0, n_geo)
        far = lo + scale * np.geomspace(1.0, 1e12, samples - n_geo)
        points = np.concatenate([near, far])
    else:
        width = hi - lo
        offsets = width * np.geomspace(1e-12, 0.25, n_geo)
        # Offsets stay a few ulps clear of the rounded end points
        start = lo + np.maximum(offsets, 4 * np.spacing(lo))
        end = hi - np.maximum(offsets, 4 * np.spacing(hi))[::-1]
        core = np.linspace(lo, hi, samples - 2 * n_geo + 2)[1:-1]
        points = np.concatenate([start, core, end])
    points = np.unique(points)
    return points[(points > lo) & (points < hi)]


def validate_branch(
    branch: KirchhoffBranch, samples: int = 64, threshold: float = RANGE_HIGH
) -> BranchValidationReport:
    """Check monotonicity, positivity and the range of K on I"""
    if samples < 16:
        raise ValueError(f"Need at least 16 samples, got {samples}")
    t = sample_points(branch, samples)
    with np.errstate(all="ignore"):
        values = np.asarray(branch(t), float)
    finite = np.isfinite(values)
    monotone_ok = bool(np.all(np.diff(values) > 0))
    positive_ok = bool(np.all(values > 0) and np.all(finite))
    range_low = float(np.min(values))
    range_high = float(np.max(values))
    unbounded = range_high >= threshold or branch.limits()[1] == math.inf
    report = BranchValidationReport(
        monotone_ok=monotone_ok,
        positive_ok=positive_ok,
        range_low=range_low,
        range_high=range_high,
        range_high_unbounded=bool(unbounded),
        range_full=bool(
            monotone_ok and positive_ok and range_low <= RANGE_LOW
            and unbounded
        ),
        samples=len(t),
    )
    log.debug("Validated branch %s: %s", branch.label, report)
    return report


# Config forms
# ------------


def parse_branch(text: str, base_dir=None) -> KirchhoffBranch:
    """Build a branch from its compact form.

    Accepted forms: tan:K, log, singular:C:S[:TLO], affine:A:B and
    table:PATH. Relative table paths are resolved against base_dir.
    """
    family, _, rest = text.strip().partition(":")
    family = family.lower()
    args = rest.split(":") if rest else []
    try:
        if family == "tan" and len(args) == 1:
            return TanBranch(int(args[0]))
        if family == "log" and not args:
            return LogBranch()
        if family == "singular" and len(args) in (2, 3):
            return SingularPowerBranch(*map(float, args))
        if family == "affine" and len(args) in (1, 2):
            return AffineBranch(*map(float, args))
        if family == "table" and rest:
            path = pathlib.Path(rest)
            if base_dir is not None and not path.is_absolute():
                path = pathlib.Path(base_dir) / path
            return TableBranch.from_csv(path)
    except ValueError as error:
        raise InvalidConfig(f"Bad branch {text!r}: {error}") from None
    raise InvalidConfig(f"Unknown branch form: {text!r}")


def branch_from_mapping(mapping, base_dir=None) -> KirchhoffBranch:
    """Build a branch from a branch config section"""
    family = mapping.get("family", "").strip().lower()
    keys = {
        "tan": ["k"],
        "log": [],
        "singular": ["c", "s", "t_lo"],
        "affine": ["a", "b"],
        "table": ["path"],
    }
    if family not in keys:
        raise InvalidConfig(f"Unknown branch family: {family!r}")
    values = [mapping[k] for k in keys[family] if mapping.get(k) is not None]
    return parse_branch(":".join([family, *values]), base_dir=base_dir)
