"""Exact finite-dimension mean critical-point counts, assembled in log scale.

For a Borel set ``T`` in ``R^d``::

    E[Crt^k(T)] = sqrt(2) |T| pi^{-(d+1)/2} (lambda4 / (3 lambda2))^{d/2}
                  Gamma((d+1)/2) E[exp(-L_{k+1}^2 / 2)]

with ``L_1 <= ... <= L_{d+1}`` the eigenvalues of a ``(d+1)``-GOE matrix. For
counts below a level ``u`` the GOE expectation carries an extra Gaussian CDF
factor, or an indicator for the Bargmann-Fock field. Prefactors overflow and
GOE terms underflow long before ``d = 300``, so nothing here leaves log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from scipy import special

from . import complexity as cx
from .covariance import SpectralMoments
from .errors import DomainError, ModelError, RegimeRefusal
from .goe_lab import (
    GoeSpec,
    McEstimate,
    derive_seed,
    estimate_exp_phi_term,
    estimate_exp_term,
    estimate_indicator_term,
)


@dataclass(frozen=True)
class Ball:
    R: float

    def __post_init__(self):
        if not (math.isfinite(self.R) and self.R > 0):
            raise ModelError(f"ball radius must be > 0, got {self.R}")


@dataclass(frozen=True)
class Cube:
    """The cube ``[0, L / sqrt(d)]^d``."""

    L: float

    def __post_init__(self):
        if not (math.isfinite(self.L) and self.L > 0):
            raise ModelError(f"cube side parameter must be > 0, got {self.L}")


@dataclass(frozen=True)
class AbstractVolume:
    """A domain known only through ``|T_d| = kappa_d exp(d V)``."""

    V: float

    def __post_init__(self):
        if not math.isfinite(self.V):
            raise ModelError(f"volume exponent must be finite, got {self.V}")


DomainSpec = Union[Ball, Cube, AbstractVolume]


@dataclass(frozen=True)
class MeanCountResult:
    d: int
    k: int
    u: float
    log_mean: float
    se_log: float
    theta_target: float

    @property
    def gap(self) -> float:
        return self.log_mean / self.d - self.theta_target


def log_gamma(x: float) -> float:
    """``log Gamma(x)`` for ``x > 0``."""
    if not x > 0:
        raise DomainError(f"log_gamma needs x > 0, got {x}")
    return float(special.gammaln(x))


def log_unit_ball_volume(d: int) -> float:
    return 0.5 * d * math.log(math.pi) - log_gamma(0.5 * d + 1)


def log_volume(domain: DomainSpec, d: int) -> float:
    """``log |T_d|``."""
    if d < 1:
        raise DomainError(f"dimension must be >= 1, got {d}")
    if isinstance(domain, Ball):
        return d * math.log(domain.R) + log_unit_ball_volume(d)
    if isinstance(domain, Cube):
        return d * (math.log(domain.L) - 0.5 * math.log(d))
    if isinstance(domain, AbstractVolume):
        return d * domain.V + log_unit_ball_volume(d)
    raise ModelError(f"unknown domain {domain!r}")


def volume_exponent(domain: DomainSpec, d: int) -> float:
    """``(1/d) log(|T_d| / kappa_d)``: the finite-``d`` volume exponent."""
    if isinstance(domain, Ball):
        return math.log(domain.R)
    if isinstance(domain, AbstractVolume):
        return domain.V
    return (log_volume(domain, d) - log_unit_ball_volume(d)) / d


def limiting_volume_exponent(domain: DomainSpec) -> float:
    if isinstance(domain, Ball):
        return cx.volume_from_radius(domain.R)
    if isinstance(domain, Cube):
        return cx.volume_from_side(domain.L)
    return domain.V


def domain_from_json(obj: dict) -> DomainSpec:
    """``{"domain": "ball", "R": ..}`` | ``{"domain": "cube", "L": ..}`` | ``{"domain": "volume", "V": ..}``."""
    kind = str(obj.get("domain", "")).lower()
    try:
        if kind == "ball":
            return Ball(float(obj["R"]))
        if kind == "cube":
            return Cube(float(obj["L"]))
        if kind in ("volume", "abstract"):
            return AbstractVolume(float(obj["V"]))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(f"bad domain {obj!r}: {exc}") from None
    raise ModelError(f"unknown domain kind {kind!r}")


def _log_prefactor(domain: DomainSpec, m: SpectralMoments, d: int) -> float:
    return (
        0.5 * math.log(2)
        + log_volume(domain, d)
        - 0.5 * (d + 1) * math.log(math.pi)
        + 0.5 * d * m.log_ratio
        + log_gamma(0.5 * (d + 1))
    )


def _check_match(goe: McEstimate, d: int, k: int) -> None:
    if goe.d != d or goe.k != k:
        raise ModelError(f"GOE estimate is for (d, k) = ({goe.d}, {goe.k}), requested ({d}, {k})")


def log_mean_crt(
    domain: DomainSpec, moments: SpectralMoments, d: int, k: int, goe: McEstimate
) -> MeanCountResult:
    """``log E[Crt^k(T_d)]`` from a GOE estimate of ``E[exp(-L_{k+1}^2/2)]``."""
    _check_match(goe, d, k)
    if goe.u != math.inf:
        raise ModelError("log_mean_crt needs an unweighted GOE term (u = +inf)")
    target = cx.theta_total(cx.LandscapeParams(moments, limiting_volume_exponent(domain)))
    lm = _log_prefactor(domain, moments, d) + goe.log_mean
    return MeanCountResult(d, k, math.inf, lm, goe.se_log, target)


def log_mean_crt_below(
    domain: DomainSpec, moments: SpectralMoments, d: int, k: int, u: float, goe: McEstimate
) -> MeanCountResult:
    """``log E[Crt^k_{u down}(T_d)]``; the GOE term must match the field's branch."""
    kind = "indicator" if moments.is_bargmann_fock else "exp_phi"
    _check_match(goe, d, k)
    if not (goe.kind == kind and goe.u == u) and not (u == math.inf and goe.kind == "exp"):
        raise ModelError(
            f"need a {kind!r} GOE term at u = {u}, got {goe.kind!r} at u = {goe.u}"
        )
    params = cx.LandscapeParams(moments, limiting_volume_exponent(domain))
    if u == math.inf:
        target = cx.theta_total(params)
    elif u == -math.inf:
        target = -math.inf
    else:
        target = cx.theta_k(params, k, scaled_from_level(u, d)).value
    lm = _log_prefactor(domain, moments, d) + goe.log_mean
    return MeanCountResult(d, k, u, lm, goe.se_log, target)


def level_from_scaled(v: float, d: int) -> float:
    """``u = v sqrt(d + 1)``."""
    return v * math.sqrt(d + 1)


def scaled_from_level(u: float, d: int) -> float:
    return u / math.sqrt(d + 1)


def goe_term_below(
    moments: SpectralMoments, d: int, k: int, u: float, spec: GoeSpec
) -> McEstimate:
    """The MC GOE term matching ``log_mean_crt_below`` for this field."""
    if moments.is_bargmann_fock:
        return estimate_indicator_term(d, k, u, spec)
    return estimate_exp_phi_term(d, k, u, moments, spec)


def convergence_study(
    domain: DomainSpec,
    moments: SpectralMoments,
    k: int,
    v: float,
    d_list: Sequence[int],
    spec: GoeSpec,
) -> list[MeanCountResult]:
    """Finite-``d`` mean counts against the limiting complexity.

    Each dimension uses its own seed derived from ``(spec.seed, d)``. Levels
    below ``E_star`` are refused: there the expectation is carried by rare
    eigenvalue excursions that plain Monte Carlo does not see.
    """
    e1, _ = cx.edges(moments)
    if not v >= e1:
        raise RegimeRefusal(
            f"regime not MC-verifiable (v = {v} < E_star = {e1}); "
            "use the closed-form maximization oracle"
        )
    out = []
    for d in d_list:
        d = int(d)
        sub = GoeSpec(seed=derive_seed(spec.seed, d), samples=spec.samples, workers=spec.workers)
        u = level_from_scaled(v, d)
        if u == math.inf:
            goe = estimate_exp_term(d, k, sub)
            out.append(log_mean_crt(domain, moments, d, k, goe))
        else:
            goe = goe_term_below(moments, d, k, u, sub)
            out.append(log_mean_crt_below(domain, moments, d, k, u, goe))
    return out


def limit_theta(domain: DomainSpec, moments: SpectralMoments, k: int, v: Optional[float]) -> float:
    """Limiting exponent for the domain family (``v = None`` or ``inf``: all levels)."""
    params = cx.LandscapeParams(moments, limiting_volume_exponent(domain))
    if v is None or v == math.inf:
        return cx.theta_total(params)
    return cx.theta_k(params, k, v).value
