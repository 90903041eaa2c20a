"""GOE eigenvalue sampling and the GOE expectations behind mean critical counts.

Normalisation: ``M = (A + A^T) / 2`` with ``A`` i.i.d. standard normal, so the
diagonal has variance 1 and the off-diagonal 1/2. The joint eigenvalue
density is then proportional to ``prod_{i<j} |l_i - l_j| exp(-sum l_i^2 / 2)``
and ``L / sqrt(n)`` fills ``[-sqrt 2, sqrt 2]``.

Every Monte Carlo quantity is accumulated in log space. Sample ``i`` draws
from its own counter-based Philox stream keyed by ``(seed, i)``, so results
do not depend on how samples are split across workers.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special

from .covariance import SpectralMoments
from .errors import DomainError, ModelError, NumericalFailure

ORACLE_BOX = 12.0
ORACLE_TOL = 1e-10
_CHUNK_ENTRIES = 1 << 20


def default_workers() -> int:
    """Worker count from ``CRTK_THREADS``; defaults to the CPU count."""
    env = os.environ.get("CRTK_THREADS", "").strip()
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ModelError(f"CRTK_THREADS must be a positive integer, got {env!r}") from None
        if n < 1:
            raise ModelError(f"CRTK_THREADS must be a positive integer, got {env!r}")
        return n
    return os.cpu_count() or 1


@dataclass(frozen=True)
class GoeSpec:
    """Monte Carlo settings. ``n`` is optional; when set it must equal ``d + 1``."""

    seed: int
    samples: int
    n: Optional[int] = None
    workers: Optional[int] = None

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ModelError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.samples < 1:
            raise ModelError(f"samples must be >= 1, got {self.samples}")
        if self.n is not None and self.n < 1:
            raise ModelError(f"matrix size must be >= 1, got {self.n}")

    def size_for(self, d: int) -> int:
        if d < 1:
            raise DomainError(f"dimension must be >= 1, got {d}")
        if self.n is not None and self.n != d + 1:
            raise ModelError(f"GoeSpec.n = {self.n} does not match d + 1 = {d + 1}")
        return d + 1


@dataclass(frozen=True)
class McEstimate:
    """Log of an estimated GOE expectation.

    ``kind`` names the functional (``exp``, ``exp_phi``, ``indicator``) and
    ``u`` the level it was evaluated at. Exact (quadrature) values carry
    ``samples = 0`` and ``se_log = 0``.
    """

    log_mean: float
    se_log: float
    samples: int
    seed: Optional[int]
    d: int
    k: int
    kind: str = "exp"
    u: float = math.inf


def goe_stream(seed: int, index: int) -> np.random.Generator:
    """Independent deterministic stream for sample ``index``."""
    return np.random.Generator(np.random.Philox(key=int(seed), counter=int(index) << 192))


def derive_seed(seed: int, *tags: int) -> int:
    """64-bit child seed for a tagged sub-study (e.g. one dimension)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(t) for t in tags))
    return int(ss.generate_state(1, np.uint64)[0])


def _goe_matrix(n: int, stream: np.random.Generator) -> np.ndarray:
    a = stream.standard_normal((n, n))
    return (a + a.T) / 2


def _eigvalsh(m: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.eigvalsh(m)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"decomposition failure: {exc}") from None


def sample_goe_eigs(n: int, stream: np.random.Generator) -> np.ndarray:
    """Ascending eigenvalues of one ``n x n`` GOE matrix drawn from ``stream``."""
    if n < 1:
        raise DomainError(f"matrix size must be >= 1, got {n}")
    return _eigvalsh(_goe_matrix(n, stream))


def _sample_block(n: int, seed: int, start: int, stop: int) -> np.ndarray:
    mats = np.stack([_goe_matrix(n, goe_stream(seed, i)) for i in range(start, stop)])
    return _eigvalsh(mats)


def goe_eigenvalue_samples(
    n: int, seed: int, samples: int, workers: Optional[int] = None
) -> np.ndarray:
    """``(samples, n)`` array of sorted eigenvalues, row ``i`` from stream ``(seed, i)``.

    Blocks have a fixed size that depends only on ``n``; ``workers`` changes
    scheduling, never the result.
    """
    if n < 1 or samples < 1:
        raise DomainError("need n >= 1 and samples >= 1")
    block = max(1, min(samples, _CHUNK_ENTRIES // (n * n)))
    bounds = [(s, min(s + block, samples)) for s in range(0, samples, block)]
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(bounds) == 1:
        parts = [_sample_block(n, seed, a, b) for a, b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda ab: _sample_block(n, seed, *ab), bounds))
    out = np.concatenate(parts, axis=0)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=16)
def _cached_samples(n: int, seed: int, samples: int) -> np.ndarray:
    return goe_eigenvalue_samples(n, seed, samples)


def _eigs_for(d: int, k: int, spec: GoeSpec) -> np.ndarray:
    n = spec.size_for(d)
    if not (isinstance(k, (int, np.integer)) and 0 <= k <= d):
        raise DomainError(f"index k must be an integer in [0, d] = [0, {d}], got {k}")
    if spec.workers is not None:
        eigs = goe_eigenvalue_samples(n, spec.seed, spec.samples, spec.workers)
    else:
        eigs = _cached_samples(n, int(spec.seed), int(spec.samples))
    return eigs[:, k]


def log_mean_exp(log_w: np.ndarray) -> tuple[float, float]:
    """``log(mean(exp(log_w)))`` and its delta-method standard error."""
    log_w = np.asarray(log_w, dtype=float)
    top = float(np.max(log_w))
    if top == -math.inf:
        return -math.inf, math.inf
    w = np.exp(log_w - top)
    mean = float(np.mean(w))
    if log_w.size < 2:
        return top + math.log(mean), math.inf
    se = float(np.std(w, ddof=1)) / math.sqrt(log_w.size) / mean
    return top + math.log(mean), se


def log_phi(x):
    """``log Phi(x)`` for the standard normal CDF, accurate deep in the left tail."""
    return special.log_ndtr(x)


def _phi_argument(moments: SpectralMoments, u: float, L: np.ndarray) -> np.ndarray:
    lam2, lam4 = moments.lambda2, moments.lambda4
    return math.sqrt(lam4 / moments.excess) * (u - L * (math.sqrt(6) * lam2 / math.sqrt(lam4)))


def _phi_log_weight(moments: SpectralMoments, u: float, L: np.ndarray) -> np.ndarray:
    if u == math.inf:
        return np.zeros_like(L)
    if u == -math.inf:
        return np.full_like(L, -math.inf)
    return log_phi(_phi_argument(moments, u, L))


def _indicator_log_weight(u: float, L: np.ndarray) -> np.ndarray:
    return np.where(L <= u / math.sqrt(2), 0.0, -math.inf)


def estimate_exp_term(d: int, k: int, spec: GoeSpec) -> McEstimate:
    """MC estimate of ``E[exp(-L_{k+1}^2 / 2)]`` for an ``(d+1)``-GOE matrix."""
    L = _eigs_for(d, k, spec)
    lm, se = log_mean_exp(-0.5 * L * L)
    return McEstimate(lm, se, spec.samples, int(spec.seed), d, k, "exp", math.inf)


def estimate_exp_phi_term(
    d: int, k: int, u: float, moments: SpectralMoments, spec: GoeSpec
) -> McEstimate:
    """MC estimate of the Gaussian-CDF weighted term (needs ``lambda4 > 3 lambda2^2``)."""
    if moments.is_bargmann_fock:
        raise DomainError("use indicator variant: lambda4 = 3 lambda2^2")
    L = _eigs_for(d, k, spec)
    lm, se = log_mean_exp(-0.5 * L * L + _phi_log_weight(moments, u, L))
    return McEstimate(lm, se, spec.samples, int(spec.seed), d, k, "exp_phi", float(u))


def estimate_indicator_term(d: int, k: int, u: float, spec: GoeSpec) -> McEstimate:
    """MC estimate of ``E[exp(-L_{k+1}^2 / 2) 1{L_{k+1} <= u / sqrt 2}]``."""
    L = _eigs_for(d, k, spec)
    lm, se = log_mean_exp(-0.5 * L * L + _indicator_log_weight(u, L))
    return McEstimate(lm, se, spec.samples, int(spec.seed), d, k, "indicator", float(u))


# --- exact small-matrix oracle ---------------------------------------------


def _density(l: tuple) -> float:
    vdm = 1.0
    for i in range(len(l)):
        for j in range(i + 1, len(l)):
            vdm *= l[j] - l[i]
    return vdm * math.exp(-0.5 * sum(t * t for t in l))


def _ordered_integral(n: int, g: Callable[[tuple], float], upper: Optional[tuple[int, float]]):
    """Integral of ``g(l) * density(l)`` over ``-B <= l_1 <= ... <= l_n <= B``."""
    caps = [ORACLE_BOX] * n
    if upper is not None:
        p, bound = upper
        for i in range(p + 1):
            caps[i] = min(caps[i], bound)

    def level(prefix: tuple, i: int) -> float:
        lo = prefix[-1] if prefix else -ORACLE_BOX
        hi = caps[i]
        if hi <= lo:
            return 0.0
        if i == n - 1:
            fn = lambda t: g(prefix + (t,)) * _density(prefix + (t,))
        else:
            fn = lambda t: level(prefix + (t,), i + 1)
        val, err = integrate.quad(fn, lo, hi, epsabs=ORACLE_TOL, epsrel=ORACLE_TOL, limit=200)
        if not math.isfinite(val):
            raise NumericalFailure("quadrature non-convergence")
        return val

    return level((), 0)


@lru_cache(maxsize=4)
def _partition(n: int) -> float:
    return _ordered_integral(n, lambda l: 1.0, None)


def oracle_small_d(
    n: int, functional: Callable[[tuple], float], upper: Optional[tuple[int, float]] = None
) -> float:
    """Exact GOE expectation of ``functional(L_1, ..., L_n)`` for ``n`` in {2, 3}.

    ``upper = (p, c)`` restricts to ``L_{p+1} <= c`` so indicator functionals
    integrate over their true support instead of across a jump.
    """
    if n not in (2, 3):
        raise DomainError(f"oracle supports n in {{2, 3}}, got {n}")
    return _ordered_integral(n, functional, upper) / _partition(n)


def oracle_exp_term(d: int, k: int) -> McEstimate:
    val = oracle_small_d(d + 1, lambda l: math.exp(-0.5 * l[k] ** 2))
    return McEstimate(math.log(val), 0.0, 0, None, d, k, "exp", math.inf)


def oracle_exp_phi_term(d: int, k: int, u: float, moments: SpectralMoments) -> McEstimate:
    if moments.is_bargmann_fock:
        raise DomainError("use indicator variant: lambda4 = 3 lambda2^2")

    def fn(l):
        lw = float(_phi_log_weight(moments, u, np.float64(l[k])))
        return math.exp(lw - 0.5 * l[k] ** 2)

    val = oracle_small_d(d + 1, fn)
    lm = math.log(val) if val > 0 else -math.inf
    return McEstimate(lm, 0.0, 0, None, d, k, "exp_phi", float(u))


def oracle_indicator_term(d: int, k: int, u: float) -> McEstimate:
    upper = None if u == math.inf else (k, u / math.sqrt(2))
    val = oracle_small_d(d + 1, lambda l: math.exp(-0.5 * l[k] ** 2), upper)
    lm = math.log(val) if val > 0 else -math.inf
    return McEstimate(lm, 0.0, 0, None, d, k, "indicator", float(u))
