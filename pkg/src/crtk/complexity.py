"""Landscape complexity of isotropic Gaussian fields in high dimension.

All levels are scaled: a level ``u`` in dimension ``d`` corresponds to
``v = u / sqrt(d + 1)``. Domains enter only through the volume exponent ``V``
(see :mod:`crtk.kac_rice`). The complexity ``theta_k(V, v)`` is the limit of
``(1/d) log E[# index-k critical points below u]``.

Two thresholds organise the level axis::

    E_star  = -(lambda4 + 3 lambda2^2) / (lambda2 sqrt(3 lambda4))
    E_2star = -2 sqrt(3) lambda2 / sqrt(lambda4)

Above ``E_2star`` the complexity no longer depends on ``v``; between the two
it grows with ``v`` but ignores ``k``; below ``E_star`` it depends on both and
is given by a one-dimensional optimisation solved in closed form by
:func:`optimizer_x`. When ``lambda4 = 3 lambda2^2`` both thresholds merge at -2.
"""

from __future__ import annotations

import enum
import math
import numbers
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .covariance import SpectralMoments
from .errors import DomainError, ModelError
from .rate_function import SQRT2, rate_I, rate_J

BISECT_MAX_ITER = 200
BRACKET_LIMIT = -1e6


class Regime(str, enum.Enum):
    HIGH = "HIGH"
    MID = "MID"
    LOW = "LOW"
    BF_HIGH = "BF_HIGH"
    BF_LOW = "BF_LOW"


@dataclass(frozen=True)
class LandscapeParams:
    moments: SpectralMoments
    V: float

    def __post_init__(self):
        if not math.isfinite(self.V):
            raise ModelError(f"volume exponent V must be finite, got {self.V}")


@dataclass(frozen=True)
class ThetaResult:
    value: float
    regime: Regime
    optimizer_x: Optional[float] = None


@dataclass(frozen=True)
class CriticalLevels:
    V_c1: float
    V_c2: float
    v_c: Optional[float] = None
    v_c_k: Optional[list[float]] = None
    ks: list[int] = field(default_factory=list)
    note: str = ""


def _check_index(k, real_k: bool = False) -> float:
    if isinstance(k, bool) or not isinstance(k, numbers.Real) or math.isnan(k):
        raise DomainError(f"index k must be a number, got {k!r}")
    if k < 0:
        raise DomainError(f"index k must be >= 0, got {k}")
    if not real_k and k != int(k):
        raise DomainError(f"index k must be an integer, got {k}")
    return float(k)


def edges(m: SpectralMoments) -> tuple[float, float]:
    """``(E_star, E_2star)``; both equal -2 for the Bargmann-Fock field."""
    if m.is_bargmann_fock:
        return -2.0, -2.0
    lam2, lam4 = m.lambda2, m.lambda4
    e1 = -(lam4 + 3 * lam2**2) / (lam2 * math.sqrt(3 * lam4))
    e2 = -2 * math.sqrt(3) * lam2 / math.sqrt(lam4)
    return e1, e2


def edge_gap(m: SpectralMoments) -> float:
    """``E_2star - E_star``, computed from the excess to avoid cancellation."""
    return m.excess / (m.lambda2 * math.sqrt(3 * m.lambda4))


def optimizer_x(m: SpectralMoments, k: float, v: float, *, real_k: bool = False) -> float:
    """Maximiser ``x_{k,v}`` of the low-level variational problem (``v <= E_star``).

    The stationarity condition is a quadratic in ``x``. Near the edge the root
    sits within ``~1e-8`` of ``-sqrt2`` and ``I(-x)`` scales like ``t^(3/2)``
    in ``t = -x - sqrt2``, so ``t`` is formed directly: with ``K = (k+1) gap``,
    ``D = v^2 - E_star^2`` and ``S = sqrt(K^2 + D)`` every factor below is
    sign-definite and nothing cancels, including the ``a -> 0`` case.
    """
    k = _check_index(k, real_k)
    if m.is_bargmann_fock:
        raise DomainError("use Bargmann-Fock branch: optimizer undefined when lambda4 = 3 lambda2^2")
    e1, _ = edges(m)
    if not v <= e1:
        raise DomainError(f"optimizer_x needs v <= E_star = {e1}, got v = {v}")
    K = (k + 1) * edge_gap(m)
    D = (v - e1) * (v + e1)
    S = math.sqrt(K * K + D)
    num = 2 * (e1 - v) * D * (K * K + v * v)
    den = (K + S) * -(v * S + K * e1) * SQRT2 * (v * e1 + K * S)
    return -SQRT2 - num / den


def theta_total(params: LandscapeParams) -> float:
    """Growth rate of the mean number of critical points of any fixed index."""
    return params.V + 0.5 * params.moments.log_ratio - 1.0


def _theta_low(params: LandscapeParams, k: float, v: float) -> tuple[float, float]:
    m = params.moments
    _, e2 = edges(m)
    x = optimizer_x(m, k, v, real_k=True)
    quad = x * x / 2 - (v + x * e2 / SQRT2) ** 2 / (e2 * edge_gap(m))
    return params.V + 0.5 * m.log_ratio - quad - rate_J(k, x), x


def theta_k(params: LandscapeParams, k, v: float, *, real_k: bool = False) -> ThetaResult:
    """Complexity ``theta_k(V, v)`` of index-``k`` critical points below level ``v``.

    ``real_k=True`` accepts a real ``k >= 0`` (the analytic extension used for
    derivatives in ``k``).
    """
    k = _check_index(k, real_k)
    if math.isnan(v):
        raise DomainError("level v is NaN")
    m = params.moments
    base = params.V + 0.5 * m.log_ratio
    if m.is_bargmann_fock:
        if v >= -2.0:
            return ThetaResult(base - 1.0, Regime.BF_HIGH)
        return ThetaResult(base - v * v / 4 - (k + 1) * rate_I(-v / SQRT2), Regime.BF_LOW)
    e1, e2 = edges(m)
    if v >= e2:
        return ThetaResult(base - 1.0, Regime.HIGH)
    if v >= e1:
        return ThetaResult(base - 1.0 + (v - e2) ** 2 / (e2 * edge_gap(m)), Regime.MID)
    value, x = _theta_low(params, k, v)
    return ThetaResult(value, Regime.LOW, x)


def critical_volume_1(m: SpectralMoments) -> float:
    """Volume exponent at which ``theta_total`` vanishes."""
    return 1.0 - 0.5 * m.log_ratio


def critical_volume_2(m: SpectralMoments) -> float:
    """Volume exponent at which ``theta_k(V, E_star)`` vanishes (``= V_c1`` for BF)."""
    if m.is_bargmann_fock:
        return critical_volume_1(m)
    e1, e2 = edges(m)
    return e1 / e2 - 0.5 * m.log_ratio


def critical_level_mid(params: LandscapeParams) -> float:
    """Index-free zero level ``v_c`` for ``V_c1 < V < V_c2``."""
    m = params.moments
    if m.is_bargmann_fock:
        raise DomainError("no mid regime for the Bargmann-Fock field")
    vc1, vc2 = critical_volume_1(m), critical_volume_2(m)
    if not vc1 < params.V < vc2:
        raise DomainError(f"v_c needs V_c1 < V < V_c2 = ({vc1}, {vc2}), got V = {params.V}")
    _, e2 = edges(m)
    return e2 - math.sqrt((vc1 - params.V) * e2 * edge_gap(m))


def critical_level_k(params: LandscapeParams, k: int) -> float:
    """Zero level ``v_c^k`` of ``theta_k`` below ``E_star`` (layered regime).

    Bisection after expanding the bracket ``[E_star - w, E_star]`` by doubling
    ``w``; theta_k is increasing in ``v`` there.
    """
    k = int(_check_index(k))
    m = params.moments
    if m.is_bargmann_fock:
        top, vcrit = -2.0, critical_volume_1(m)
    else:
        top, vcrit = edges(m)[0], critical_volume_2(m)
    if not params.V > vcrit:
        raise DomainError(f"v_c^k needs V > {vcrit}, got V = {params.V}")

    def f(v):
        return theta_k(params, k, v).value

    hi = top
    width = 1.0
    lo = hi - width
    while f(lo) >= 0:
        hi = lo
        width *= 2
        lo = top - width
        if lo < BRACKET_LIMIT:
            raise DomainError("no root: theta_k stays positive down to v = -1e6")
    for _ in range(BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return lo if abs(f(lo)) <= abs(f(hi)) else hi


def critical_levels(params: LandscapeParams, ks: Sequence[int] = (0, 1)) -> CriticalLevels:
    """Critical volumes and whichever critical levels exist at ``params.V``."""
    m = params.moments
    vc1, vc2 = critical_volume_1(m), critical_volume_2(m)
    ks = [int(_check_index(k)) for k in ks]
    V = params.V
    if V < vc1 or (V == vc1 and V == vc2):
        return CriticalLevels(vc1, vc2, ks=ks, note="subcritical volume")
    if V > vc2:
        return CriticalLevels(
            vc1, vc2, v_c_k=[critical_level_k(params, k) for k in ks], ks=ks, note="layered"
        )
    if vc1 < V < vc2:
        return CriticalLevels(vc1, vc2, v_c=critical_level_mid(params), ks=ks, note="mid")
    return CriticalLevels(vc1, vc2, ks=ks, note="critical volume")


def _check_low(params: LandscapeParams, v: float) -> None:
    m = params.moments
    if m.is_bargmann_fock:
        raise DomainError("derivative formulas need lambda4 > 3 lambda2^2")
    e1, _ = edges(m)
    if not v < e1:
        raise DomainError(f"derivatives are defined on v < E_star = {e1}, got v = {v}")


def theta_dv(params: LandscapeParams, k: float, v: float) -> float:
    """``d theta_k / d v`` on the low branch."""
    _check_low(params, v)
    m = params.moments
    _, e2 = edges(m)
    x = optimizer_x(m, k, v, real_k=True)
    return SQRT2 * (SQRT2 * v + x * e2) / (e2 * edge_gap(m))


def theta_dk(params: LandscapeParams, k: float, v: float) -> float:
    """``d theta_k / d k`` on the low branch, ``k`` extended to the reals."""
    _check_low(params, v)
    x = optimizer_x(params.moments, k, v, real_k=True)
    return -rate_I(-x)


def domain_scale(V: float) -> tuple[float, float]:
    """Ball radius ``R`` and cube side ``L`` (cube ``[0, L/sqrt d]^d``) for exponent ``V``."""
    return math.exp(V), math.sqrt(2 * math.pi) * math.exp(V + 0.5)


def volume_from_radius(R: float) -> float:
    if not R > 0:
        raise DomainError(f"radius must be > 0, got {R}")
    return math.log(R)


def volume_from_side(L: float) -> float:
    if not L > 0:
        raise DomainError(f"side must be > 0, got {L}")
    return math.log(L) - 0.5 * math.log(2 * math.pi) - 0.5
