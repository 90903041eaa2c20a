"""Large-deviation rate functions for the smallest GOE eigenvalues.

With eigenvalues scaled by ``sqrt(n)`` the spectrum edge sits at ``-sqrt(2)``.
The (k+1)-th smallest scaled eigenvalue pays ``J_k(x) = (k+1) I(-x)`` to sit
at ``x`` left of the edge, where ``I(x) = int_{sqrt 2}^x sqrt(z^2 - 2) dz``.
Everywhere else the cost is infinite at this speed; ``math.inf`` stands for
that so that ``exp(-d J)`` and suprema need no special casing.
"""

from __future__ import annotations

import math

from .errors import DomainError

SQRT2 = math.sqrt(2.0)
EDGE_SERIES_WIDTH = 1e-4

# I(sqrt2 + t) = sum_n c_n t^(n + 3/2), from sqrt(t (2 sqrt2 + t)) expanded binomially;
# c_0 = 2^(7/4) / 3, c_1 = 2^(1/4) / 10. Four terms leave ~1e-18 relative at the switch.
_EDGE_COEFS = tuple(
    2.0**0.75 * c / (2 * SQRT2) ** n / (n + 1.5) for n, c in enumerate((1.0, 0.5, -0.125, 0.0625))
)


def rate_I(x: float) -> float:
    """``I(x)`` in closed form; ``inf`` below the edge ``sqrt(2)``."""
    if math.isnan(x):
        return math.nan
    if x < SQRT2:
        return math.inf
    if x == math.inf:
        return math.inf
    t = x - SQRT2
    if t < EDGE_SERIES_WIDTH:
        # closed form cancels two O(sqrt t) terms here, losing ~eps / t relative
        c0, c1, c2, c3 = _EDGE_COEFS
        return t**1.5 * (c0 + t * (c1 + t * (c2 + t * c3)))
    s = math.sqrt(t * (x + SQRT2))
    return 0.5 * x * s - math.log((x + s) / SQRT2)


def rate_J(k: float, x: float) -> float:
    """``J_k(x) = (k+1) I(-x)``; finite only for ``x <= -sqrt(2)``.

    ``k`` may be any real ``>= 0``; the integer restriction lives with callers.
    """
    if k < 0 or math.isnan(k):
        raise DomainError(f"index k must be >= 0, got {k}")
    i = rate_I(-x)
    if i == 0.0:
        return 0.0
    return (k + 1) * i


def rate_I_prime(x: float) -> float:
    """``I'(x) = sqrt(x^2 - 2)`` for ``x > sqrt(2)``."""
    if not x > SQRT2:
        raise DomainError(f"I'(x) needs x > sqrt(2), got {x}")
    return math.sqrt((x - SQRT2) * (x + SQRT2))
