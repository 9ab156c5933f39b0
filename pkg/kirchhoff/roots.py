"""Bracketing and bisection for increasing scalar functions"""

# Built-in
import logging
import math
import typing

# Package
from kirchhoff.errors import NoConvergence

log = logging.getLogger(__name__)

MAX_BISECTIONS = 400


class Root(typing.NamedTuple):
    """Result of a bisection"""

    x: float
    fx: float
    lo: float
    hi: float
    iterations: int


def bisect_increasing(
    func: typing.Callable[[float], float],
    lo: float,
    hi: float,
    *,
    xtol: float,
    ftol: float = 0.0,
    flo: float = None,
    fhi: float = None,
    maxiter: int = MAX_BISECTIONS,
) -> Root:
    """Find a sign change of an increasing function on [lo, hi].

    Requires func(lo) <= 0 <= func(hi). Stops when |func(x)| <= ftol
    or when hi - lo <= xtol * max(1, |x|). The midpoint is returned
    when the bracket cannot be split any further in floating point.
    """
    if flo is None:
        flo = func(lo)
    if fhi is None:
        fhi = func(hi)
    if flo > 0 or fhi < 0:
        raise ValueError(
            f"No sign change on [{lo!r}, {hi!r}]: f(lo)={flo!r}, f(hi)={fhi!r}"
        )
    if flo == 0:
        return Root(lo, flo, lo, hi, 0)
    if fhi == 0:
        return Root(hi, fhi, lo, hi, 0)
    for i in range(1, maxiter + 1):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            # Bracket exhausted at machine precision
            return Root(mid, func(mid), lo, hi, i)
        fmid = func(mid)
        if abs(fmid) <= ftol:
            return Root(mid, fmid, lo, hi, i)
        if fmid < 0:
            lo, flo = mid, fmid
        else:
            hi, fhi = mid, fmid
        if hi - lo <= xtol * max(1.0, abs(mid)):
            x = 0.5 * (lo + hi)
            return Root(x, func(x), lo, hi, i)
    raise NoConvergence(
        f"Bisection did not reach xtol={xtol:g} on [{lo!r}, {hi!r}]",
        iterations=maxiter,
    )


def bisect_log(
    func: typing.Callable[[float], float],
    lo: float,
    hi: float,
    *,
    rtol: float,
    ftol: typing.Callable[[float, float], bool] = None,
    flo: float = None,
    fhi: float = None,
    maxiter: int = MAX_BISECTIONS,
) -> Root:
    """Bisection of an increasing function of a positive variable.

    The bracket is split at the geometric mean, so a bracket spanning
    many decades converges as fast as a narrow one. ``ftol(x, fx)``
    may accept a point early.
    """
    if lo <= 0:
        raise ValueError("Logarithmic bisection needs lo > 0")
    if flo is None:
        flo = func(lo)
    if fhi is None:
        fhi = func(hi)
    if flo > 0 or fhi < 0:
        raise ValueError(
            f"No sign change on [{lo!r}, {hi!r}]: f(lo)={flo!r}, f(hi)={fhi!r}"
        )
    for i in range(1, maxiter + 1):
        mid = math.sqrt(lo * hi)
        if mid in (lo, hi):
            return Root(mid, func(mid), lo, hi, i)
        fmid = func(mid)
        log.debug("bisect_log %d: x=%.16g f=%.6g", i, mid, fmid)
        if fmid == 0 or (ftol is not None and ftol(mid, fmid)):
            return Root(mid, fmid, lo, hi, i)
        if fmid < 0:
            lo, flo = mid, fmid
        else:
            hi, fhi = mid, fmid
        if hi - lo <= rtol * lo:
            x = math.sqrt(lo * hi)
            return Root(x, func(x), lo, hi, i)
    raise NoConvergence(
        f"Logarithmic bisection did not reach rtol={rtol:g}",
        iterations=maxiter,
    )
