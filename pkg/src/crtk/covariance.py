"""Schoenberg covariance models and their spectral moments.

A covariance is written ``r(x)`` with ``x`` the *squared* distance, unit
variance ``r(0) = 1``. The second and fourth spectral moments are

    lambda2 = -2 r'(0),    lambda4 = 12 r''(0),

and every covariance valid in all dimensions satisfies
``lambda4 >= 3 lambda2**2`` with equality only for ``r(x) = exp(-a x)``
(the Bargmann-Fock field).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Union

import numpy as np
from scipy import optimize, special

from .errors import ModelError, OracleError

BF_REL_TOL = 1e-12
WEIGHT_SUM_TOL = 1e-12


@dataclass(frozen=True)
class Matern:
    """Matérn covariance with smoothness ``nu`` and range ``ell`` (sigma^2 = 1)."""

    nu: float
    ell: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.nu) and math.isfinite(self.ell)):
            raise ModelError("Matern parameters must be finite")
        if self.nu <= 2:
            raise ModelError(f"moments undefined: Matern needs nu > 2, got nu={self.nu}")
        if self.ell <= 0:
            raise ModelError(f"Matern range ell must be > 0, got {self.ell}")


@dataclass(frozen=True)
class SquaredExponential:
    """``r(x) = exp(-a x)``, the Bargmann-Fock field."""

    a: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and self.a > 0):
            raise ModelError(f"decay rate a must be finite and > 0, got {self.a}")


@dataclass(frozen=True)
class DiscreteSchoenberg:
    """Finite mixture ``r(x) = sum_i p_i exp(-x w_i)``.

    ``atoms`` is a tuple of ``(weight, rate)`` pairs.
    """

    atoms: tuple[tuple[float, float], ...]

    def __post_init__(self):
        atoms = tuple((float(p), float(w)) for p, w in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if not atoms:
            raise ModelError("mixture needs at least one atom")
        for p, w in atoms:
            if not (math.isfinite(p) and p > 0):
                raise ModelError(f"mixture weights must be > 0, got {p}")
            if not (math.isfinite(w) and w >= 0):
                raise ModelError(f"mixture rates must be >= 0, got {w}")
        total = math.fsum(p for p, _ in atoms)
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ModelError(f"mixture weights sum to {total!r}, expected 1")
        if all(w == 0 for _, w in atoms):
            raise ModelError("mixture has lambda2 = 0 (all rates zero)")


@dataclass(frozen=True)
class ExplicitMoments:
    """Moments given directly; there is no functional form behind them."""

    lambda2: float
    lambda4: float

    def __post_init__(self):
        if not (math.isfinite(self.lambda2) and self.lambda2 > 0):
            raise ModelError(f"lambda2 must be finite and > 0, got {self.lambda2}")
        if not (math.isfinite(self.lambda4) and self.lambda4 > 0):
            raise ModelError(f"lambda4 must be finite and > 0, got {self.lambda4}")
        if self.lambda4 - 3 * self.lambda2**2 < -BF_REL_TOL * self.lambda4:
            raise ModelError(
                "not a Schoenberg covariance: lambda4 < 3 lambda2^2 "
                f"({self.lambda4!r} < {3 * self.lambda2**2!r})"
            )


CovarianceModel = Union[Matern, SquaredExponential, DiscreteSchoenberg, ExplicitMoments]


@dataclass(frozen=True)
class SpectralMoments:
    lambda2: float
    lambda4: float

    def __post_init__(self):
        if not (math.isfinite(self.lambda2) and self.lambda2 > 0):
            raise ModelError(f"lambda2 must be finite and > 0, got {self.lambda2}")
        if not math.isfinite(self.lambda4):
            raise ModelError("lambda4 must be finite")
        if self.lambda4 - 3 * self.lambda2**2 < -BF_REL_TOL * self.lambda4:
            raise ModelError("not a Schoenberg covariance: lambda4 < 3 lambda2^2")

    @property
    def excess(self) -> float:
        """``lambda4 - 3 lambda2^2``, clipped at zero inside the BF tolerance."""
        e = self.lambda4 - 3 * self.lambda2**2
        return 0.0 if abs(e) <= BF_REL_TOL * self.lambda4 else e

    @property
    def is_bargmann_fock(self) -> bool:
        return self.excess == 0.0

    @property
    def log_ratio(self) -> float:
        """``log(lambda4 / (3 lambda2))``."""
        return math.log(self.lambda4 / (3 * self.lambda2))


def spectral_moments(model: CovarianceModel) -> SpectralMoments:
    """Closed-form ``(lambda2, lambda4)`` for a covariance model."""
    if isinstance(model, Matern):
        nu, ell = model.nu, model.ell
        lam2 = nu / ((nu - 1) * ell**2)
        lam4 = 3 * nu**2 / ((nu - 1) * (nu - 2) * ell**4)
    elif isinstance(model, SquaredExponential):
        lam2 = 2 * model.a
        lam4 = 12 * model.a**2
    elif isinstance(model, DiscreteSchoenberg):
        lam2 = 2 * math.fsum(p * w for p, w in model.atoms)
        lam4 = 12 * math.fsum(p * w * w for p, w in model.atoms)
    elif isinstance(model, ExplicitMoments):
        lam2, lam4 = model.lambda2, model.lambda4
    else:
        raise ModelError(f"unknown covariance model {model!r}")
    return SpectralMoments(float(lam2), float(lam4))


def covariance_value(model: CovarianceModel, x: float) -> float:
    """Correlation ``r(x)`` at squared distance ``x >= 0``."""
    if x < 0 or math.isnan(x):
        raise ModelError(f"squared distance must be >= 0, got {x}")
    if isinstance(model, SquaredExponential):
        return math.exp(-model.a * x)
    if isinstance(model, DiscreteSchoenberg):
        return math.fsum(p * math.exp(-x * w) for p, w in model.atoms)
    if isinstance(model, Matern):
        return _matern(model.nu, model.ell, x)
    if isinstance(model, ExplicitMoments):
        raise ModelError("no functional form available for an explicit-moments model")
    raise ModelError(f"unknown covariance model {model!r}")


def _matern(nu: float, ell: float, x: float) -> float:
    if x == 0:
        return 1.0
    h = math.sqrt(2 * nu * x) / ell
    kve = special.kve(nu, h)
    if kve == 0:
        return 0.0
    # kve(nu, h) = K_nu(h) e^h; stay in log space so large h neither overflows h^nu nor underflows K_nu
    log_r = (1 - nu) * math.log(2) - special.gammaln(nu) + nu * math.log(h) + math.log(kve) - h
    return min(1.0, math.exp(log_r))


def _error_basis(model: CovarianceModel, order: int) -> list:
    """Error terms of the even difference stencils, in the scaled step ``s``.

    Smooth covariances leave an ``s^2, s^4, ...`` series. The Matérn form adds
    the non-analytic ``|t|^(2 nu)`` part of ``K_nu`` (``t^(2 nu) log t`` at integer
    ``nu``), which shows up as ``s^(2 nu - order + 2j)`` terms.
    """
    fns = [lambda s, p=p: s**p for p in (2, 4, 6, 8)]
    if isinstance(model, Matern):
        nu = model.nu
        integer = abs(nu - round(nu)) < 1e-12
        extra = []
        for j in range(3):
            p = 2 * nu - order + 2 * j
            if integer:
                extra.append(lambda s, p=p: s**p * math.log(s))
            elif p > 0:
                extra.append(lambda s, p=p: s**p)
        fns = extra + fns
    return fns


def _extrapolate(steps: list[float], values: list[float], basis: list, nterms: int) -> float:
    """Least-squares fit of ``D(s) = D0 + sum c_i phi_i(s)``; returns ``D0``."""
    A = np.array([[1.0] + [phi(s) for phi in basis[:nterms]] for s in steps])
    coef, *_ = np.linalg.lstsq(A, np.asarray(values), rcond=None)
    return float(coef[0])


def moments_by_quadrature(
    model: CovarianceModel, npts: int = 10, nterms: int = 6, scale: float = 0.1
) -> SpectralMoments:
    """Spectral moments from finite differences of the covariance itself.

    Works on ``f(t) = r(t^2)``, which is even in the distance ``t``, so that
    ``lambda2 = -f''(0)`` and ``lambda4 = f''''(0)`` come from symmetric
    stencils. The stencils are evaluated on half-octave steps and extrapolated
    to zero step (generalised Richardson over a known error basis). A first
    pass fixes the step scale, a second pass rescales it so the steps resolve
    the fastest-decaying part of the covariance.

    Independent of :func:`spectral_moments`; it only calls :func:`covariance_value`.
    """
    if isinstance(model, ExplicitMoments):
        raise ModelError("no functional form available for an explicit-moments model")

    def f(t: float) -> float:
        return covariance_value(model, t * t)

    hi = 1.0
    while f(hi) > 0.95:
        hi *= 2.0
        if hi > 1e150:
            raise OracleError("oracle failure: covariance does not decay")
    lo = hi / 2
    while f(lo) < 0.95:
        lo /= 2.0
        if lo < 1e-150:
            raise OracleError("oracle failure: covariance drops too fast to difference")
    t0 = optimize.brentq(lambda t: f(t) - 0.95, lo, hi, xtol=1e-300, rtol=1e-14)

    basis2, basis4 = _error_basis(model, 2), _error_basis(model, 4)
    for _ in range(2):
        hs = [t0 / 2 ** (j / 2) for j in range(npts)]
        steps = [h / t0 for h in hs]
        d2, d4 = [], []
        for h in hs:
            f1, f2 = f(h), f(2 * h)
            d2.append(2 * (f1 - 1.0) / h**2)
            d4.append((2 * f2 - 8 * f1 + 6.0) / h**4)
        lam2 = -_extrapolate(steps, d2, basis2, nterms)
        lam4 = _extrapolate(steps, d4, basis4, nterms)
        if not (lam2 > 0 and lam4 > 0):
            raise OracleError(f"oracle failure: non-positive moments ({lam2}, {lam4})")
        t0 = math.sqrt(scale * 6 * lam2 / lam4)

    coarse2 = -_extrapolate(steps, d2, basis2, nterms - 1)
    coarse4 = _extrapolate(steps, d4, basis4, nterms - 1)
    if abs(coarse2 - lam2) > 1e-4 * lam2 or abs(coarse4 - lam4) > 1e-4 * lam4:
        raise OracleError(
            f"oracle failure: extrapolation did not converge (lambda2~{lam2}, lambda4~{lam4})"
        )
    # difference noise can put a Bargmann-Fock field a hair under the bound
    if 3 * lam2**2 * (1 - 1e-6) < lam4 < 3 * lam2**2:
        lam4 = 3 * lam2**2
    return SpectralMoments(lam2, lam4)


def model_from_json(obj: Any) -> CovarianceModel:
    """Build a model from a JSON object, a JSON string, or ``@path`` to a JSON file.

    Accepted shapes::

        {"model": "matern", "nu": 4, "ell": 1}
        {"model": "bargmann_fock", "a": 5}
        {"model": "mixture", "atoms": [[p, w], ...]}
        {"model": "moments", "lambda2": ..., "lambda4": ...}
    """
    if isinstance(obj, str):
        text = obj.strip()
        if text.startswith("@"):
            text = Path(text[1:]).read_text()
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ModelError(f"model JSON does not parse: {exc}") from None
    if not isinstance(obj, dict) or "model" not in obj:
        raise ModelError('model JSON must be an object with a "model" key')
    kind = str(obj["model"]).lower()
    try:
        if kind == "matern":
            return Matern(float(obj["nu"]), float(obj.get("ell", 1.0)))
        if kind in ("bargmann_fock", "squared_exponential"):
            return SquaredExponential(float(obj["a"]))
        if kind == "mixture":
            return DiscreteSchoenberg(tuple((float(p), float(w)) for p, w in obj["atoms"]))
        if kind == "moments":
            return ExplicitMoments(float(obj["lambda2"]), float(obj["lambda4"]))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(f"bad {kind!r} model: {exc}") from None
    raise ModelError(f"unknown model kind {kind!r}")


def model_to_json(model: CovarianceModel) -> dict:
    if isinstance(model, Matern):
        return {"model": "matern", "nu": model.nu, "ell": model.ell}
    if isinstance(model, SquaredExponential):
        return {"model": "bargmann_fock", "a": model.a}
    if isinstance(model, DiscreteSchoenberg):
        return {"model": "mixture", "atoms": [list(a) for a in model.atoms]}
    return {"model": "moments", "lambda2": model.lambda2, "lambda4": model.lambda4}

