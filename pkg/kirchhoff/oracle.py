"""Independent 1D reference for the frozen problem at λ = 1

On (0, L) with constant α the problem −u'' = α·(u⁺)^q, u(0) = u(L) = 0
reduces to an initial value problem in the slope s = u'(0). The first
zero of u moves right as s grows, so s is found by bisection.
"""

# Built-in
import dataclasses
import logging

# PyPI
import numpy as np
import scipy.integrate
import scipy.special

# Package
from kirchhoff.errors import NoConvergence
from kirchhoff.roots import bisect_increasing

log = logging.getLogger(__name__)

ODE_RTOL = 1e-12
ODE_ATOL = 1e-16
SLOPE_XTOL = 1e-14
MIN_FINE_N = 4096
MAX_EXPANSIONS = 200


@dataclasses.dataclass(frozen=True, eq=False)
class OracleResult:
    """Shooting solution sampled on fine_n + 1 equidistant points"""

    t1: float
    slope: float
    x: np.ndarray
    u: np.ndarray
    q: float
    alpha: float
    length: float

    def as_dict(self) -> dict:
        return {
            "t1": self.t1,
            "slope": self.slope,
            "q": self.q,
            "alpha": self.alpha,
            "length": self.length,
            "fineN": len(self.x) - 1,
            "method": "DOP853",
            "rtol": ODE_RTOL,
        }


def _rhs(q, alpha):
    def rhs(x, y):
        u, v, _ = y
        return [v, -alpha * max(u, 0.0) ** q, v * v]

    return rhs


def _first_zero():
    def crossing(x, y):
        return y[0]

    crossing.terminal = True
    crossing.direction = -1
    return crossing


def _shoot(q, alpha, slope, x_max, dense=False):
    return scipy.integrate.solve_ivp(
        _rhs(q, alpha),
        (0.0, x_max),
        [0.0, slope, 0.0],
        method="DOP853",
        rtol=ODE_RTOL,
        atol=ODE_ATOL * max(1.0, slope),
        events=_first_zero(),
        dense_output=dense,
    )


def oracle_shoot(
    q: float, alpha: float = 1.0, length: float = 1.0, fine_n: int = 8192
) -> OracleResult:
    """Shooting solution of −u'' = α·u^q on (0, L) and t₁ = ∫u'²"""
    if not 0 < q < 1:
        raise ValueError(f"q must be in (0, 1): {q!r}")
    if not (alpha > 0 and length > 0):
        raise ValueError("alpha and length must be positive")
    if fine_n < MIN_FINE_N:
        raise ValueError(f"fine_n must be at least {MIN_FINE_N}: {fine_n}")
    x_max = 4 * length

    def zero_offset(slope):
        sol = _shoot(q, alpha, slope, x_max)
        if not sol.success:
            raise NoConvergence(f"ODE integration failed: {sol.message}")
        if sol.t_events[0].size == 0:
            return x_max - length
        return float(sol.t_events[0][0]) - length

    lo = hi = 1.0
    flo = fhi = zero_offset(1.0)
    for _ in range(MAX_EXPANSIONS):
        if flo <= 0:
            break
        hi, fhi = lo, flo
        lo /= 2
        flo = zero_offset(lo)
    for _ in range(MAX_EXPANSIONS):
        if fhi >= 0:
            break
        lo, flo = hi, fhi
        hi *= 2
        fhi = zero_offset(hi)
    if flo > 0 or fhi < 0:
        raise NoConvergence("Could not bracket the shooting slope")
    log.debug("Shooting bracket [%g, %g]", lo, hi)

    root = bisect_increasing(
        zero_offset, lo, hi, xtol=SLOPE_XTOL, flo=flo, fhi=fhi
    )
    slope = root.x
    sol = _shoot(q, alpha, slope, x_max, dense=True)
    if sol.t_events[0].size == 0:
        raise NoConvergence("Final shot did not return to zero")
    t1 = float(sol.y_events[0][0][2])
    x = np.linspace(0.0, length, fine_n + 1)
    u = sol.sol(np.minimum(x, sol.t_events[0][0]))[0]
    u[0] = u[-1] = 0.0
    log.info("Shooting oracle: slope=%.15g t1=%.15g", slope, t1)
    return OracleResult(t1, slope, x, u, q, alpha, length)


def closed_form_slope(q: float, alpha: float = 1.0, length: float = 1.0):
    """u'(0) from the first integral v²/2 + αu^p/p = s²/2, p = q + 1"""
    p = q + 1
    integral = scipy.special.beta(1 / p, 0.5) / p
    return (p / (2 * alpha) * (2 * integral / length) ** p) ** (1 / (p - 2))


def closed_form_t1(q: float, alpha: float = 1.0, length: float = 1.0):
    """t₁ = Φ(u₁) = s²·L·p/(p + 2)"""
    p = q + 1
    s = closed_form_slope(q, alpha, length)
    return s * s * length * p / (p + 2)


def scaled_t1(t1: float, q: float, *, alpha_factor=1.0, length_factor=1.0):
    """t₁ after α → c·α and L → ℓ·L"""
    return (
        t1
        * alpha_factor ** (2 / (1 - q))
        * length_factor ** ((q + 3) / (1 - q))
    )
