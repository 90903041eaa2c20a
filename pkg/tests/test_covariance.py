import json
import math

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from crtk.covariance import (
    DiscreteSchoenberg,
    ExplicitMoments,
    Matern,
    SpectralMoments,
    SquaredExponential,
    covariance_value,
    model_from_json,
    model_to_json,
    moments_by_quadrature,
    spectral_moments,
)
from crtk.errors import ModelError


def matern_by_mixture(nu, ell, x):
    """Matérn as a Gamma scale mixture of Gaussians, no Bessel functions involved.

    ``r(x) = E[exp(-x nu / (2 tau ell^2))]`` with ``tau ~ Gamma(nu, 1)``.
    """
    def integrand(tau):
        return math.exp(
            (nu - 1) * math.log(tau) - tau - special.gammaln(nu) - x * nu / (2 * tau * ell**2)
        )

    val, _ = integrate.quad(integrand, 0, math.inf, epsabs=1e-15, epsrel=1e-13, limit=400)
    return val


def matern_by_mpmath(nu, ell, x):
    mpmath.mp.dps = 40
    h = mpmath.sqrt(2 * nu * x) / ell
    return float(2 ** (1 - nu) / mpmath.gamma(nu) * h**nu * mpmath.besselk(nu, h))


# --- closed-form moments --------------------------------------------------


def test_matern_reference_moments():
    m = spectral_moments(Matern(4.0, 1.0))
    assert m.lambda2 == pytest.approx(4 / 3, rel=1e-15)
    assert m.lambda4 == pytest.approx(8.0, rel=1e-15)
    assert not m.is_bargmann_fock


@pytest.mark.parametrize("a", [0.1, 1.0, 5.0, 123.0])
def test_squared_exponential_moments(a):
    m = spectral_moments(SquaredExponential(a))
    assert (m.lambda2, m.lambda4) == pytest.approx((2 * a, 12 * a * a), rel=1e-15)
    assert m.excess == 0.0
    assert m.is_bargmann_fock


def test_two_atom_mixture_moments():
    m = spectral_moments(DiscreteSchoenberg(((0.5, 1.0), (0.5, 3.0))))
    assert (m.lambda2, m.lambda4) == pytest.approx((4.0, 60.0), rel=1e-15)
    assert m.excess == pytest.approx(12.0, rel=1e-14)


def test_explicit_moments_at_bound_are_flagged():
    m = spectral_moments(ExplicitMoments(1.0, 3.0))
    assert m.excess == 0.0 and m.is_bargmann_fock


@given(
    st.lists(
        st.tuples(st.floats(0.05, 1.0), st.floats(0.0, 50.0)), min_size=1, max_size=6
    ).filter(lambda xs: any(w > 0 for _, w in xs))
)
def test_mixture_excess_is_twelve_times_variance(raw):
    total = math.fsum(p for p, _ in raw)
    atoms = tuple((p / total, w) for p, w in raw)
    atoms = atoms[:-1] + ((1 - math.fsum(p for p, _ in atoms[:-1]), atoms[-1][1]),)
    m = spectral_moments(DiscreteSchoenberg(atoms))
    mean = math.fsum(p * w for p, w in atoms)
    var = math.fsum(p * (w - mean) ** 2 for p, w in atoms)
    assert m.lambda4 - 3 * m.lambda2**2 == pytest.approx(12 * var, rel=1e-9, abs=1e-9 * m.lambda4)
    assert m.lambda4 >= 3 * m.lambda2**2 * (1 - 1e-12)
    if len({w for _, w in atoms}) == 1:
        assert m.is_bargmann_fock
    elif var > 1e-10 * mean**2:
        assert not m.is_bargmann_fock


@given(st.floats(2.05, 30.0), st.floats(0.1, 10.0), st.floats(1.01, 10.0))
def test_matern_range_scaling_is_exact(nu, ell, c):
    m1 = spectral_moments(Matern(nu, ell))
    m2 = spectral_moments(Matern(nu, c * ell))
    assert m2.lambda2 == pytest.approx(m1.lambda2 / c**2, rel=1e-13)
    assert m2.lambda4 == pytest.approx(m1.lambda4 / c**4, rel=1e-13)
    assert m2.lambda2 < m1.lambda2 and m2.lambda4 < m1.lambda4


# --- validation -------------------------------------------------------------


@pytest.mark.parametrize("nu", [2.0, 1.5, 0.5])
def test_matern_needs_nu_above_two(nu):
    with pytest.raises(ModelError, match="moments undefined"):
        Matern(nu, 1.0)


def test_explicit_moments_below_bound_rejected():
    with pytest.raises(ModelError, match="not a Schoenberg covariance"):
        ExplicitMoments(1.0, 2.9)


@pytest.mark.parametrize(
    "atoms",
    [
        (),
        ((0.5, 1.0), (0.4, 2.0)),
        ((1.0, -1.0),),
        ((1.0, 0.0),),
        ((-0.5, 1.0), (1.5, 1.0)),
    ],
)
def test_bad_mixtures_rejected(atoms):
    with pytest.raises(ModelError):
        DiscreteSchoenberg(atoms)


def test_bad_scalars_rejected():
    for bad in (lambda: Matern(4.0, 0.0), lambda: SquaredExponential(0.0),
                lambda: SquaredExponential(math.inf), lambda: ExplicitMoments(0.0, 1.0)):
        with pytest.raises(ModelError):
            bad()
    with pytest.raises(ModelError):
        SpectralMoments(1.0, 2.0)


# --- covariance values --------------------------------------------------------


@pytest.mark.parametrize(
    "model",
    [Matern(4.0, 1.0), Matern(2.5, 0.3), SquaredExponential(5.0), DiscreteSchoenberg(((0.3, 0.5), (0.7, 2.0)))],
)
def test_unit_variance(model):
    assert covariance_value(model, 0.0) == 1.0


def test_single_atom_mixture_is_squared_exponential():
    for x in (0.0, 0.01, 0.3, 2.0, 40.0):
        assert covariance_value(DiscreteSchoenberg(((1.0, 2.5),)), x) == covariance_value(
            SquaredExponential(2.5), x
        )


def test_explicit_moments_have_no_functional_form():
    with pytest.raises(ModelError, match="no functional form"):
        covariance_value(ExplicitMoments(1.0, 4.0), 0.5)
    with pytest.raises(ModelError):
        covariance_value(Matern(4.0), -1.0)


@pytest.mark.parametrize("nu,ell", [(4.0, 1.0), (2.5, 1.0), (3.7, 0.4), (10.0, 2.0)])
@pytest.mark.parametrize("x", [1e-6, 0.01, 0.25, 1.0, 5.0, 30.0])
def test_matern_value_against_two_oracles(nu, ell, x):
    got = covariance_value(Matern(nu, ell), x)
    assert got == pytest.approx(matern_by_mpmath(nu, ell, x), rel=1e-12, abs=1e-300)
    assert got == pytest.approx(matern_by_mixture(nu, ell, x), rel=1e-9, abs=1e-15)


def test_matern_reference_point():
    # nu = 4, ell = 1, x = 0.25: h = sqrt(2)
    h = math.sqrt(2.0)
    want = 2 ** -3 / 6 * h**4 * special.kv(4, h)
    assert covariance_value(Matern(4.0, 1.0), 0.25) == pytest.approx(want, rel=1e-14)


def test_matern_far_tail_does_not_overflow():
    v = covariance_value(Matern(3.5, 1.0), 1e6)
    assert 0.0 <= v < 1e-300


# --- finite-difference oracle ---------------------------------------------------


@pytest.mark.parametrize(
    "model,want",
    [
        (SquaredExponential(2.0), (4.0, 48.0)),
        (Matern(4.0, 1.0), (4 / 3, 8.0)),
        (DiscreteSchoenberg(((0.3, 0.5), (0.7, 2.0))), (3.1, 34.5)),
    ],
)
def test_quadrature_oracle_examples(model, want):
    m = moments_by_quadrature(model)
    assert m.lambda2 == pytest.approx(want[0], rel=1e-6)
    assert m.lambda4 == pytest.approx(want[1], rel=1e-6)


@settings(max_examples=40, deadline=None)
@given(st.floats(2.3, 20.0), st.floats(0.2, 5.0))
def test_quadrature_oracle_matches_matern(nu, ell):
    model = Matern(nu, ell)
    got, want = moments_by_quadrature(model), spectral_moments(model)
    assert got.lambda2 == pytest.approx(want.lambda2, rel=1e-6)
    assert got.lambda4 == pytest.approx(want.lambda4, rel=1e-6)


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.tuples(st.floats(0.05, 1.0), st.floats(0.01, 100.0)), min_size=1, max_size=5),
    st.floats(0.01, 100.0),
)
def test_quadrature_oracle_matches_mixtures(raw, scale):
    total = math.fsum(p for p, _ in raw)
    atoms = tuple((p / total, w * scale) for p, w in raw)
    atoms = atoms[:-1] + ((1 - math.fsum(p for p, _ in atoms[:-1]), atoms[-1][1]),)
    model = DiscreteSchoenberg(atoms)
    got, want = moments_by_quadrature(model), spectral_moments(model)
    assert got.lambda2 == pytest.approx(want.lambda2, rel=1e-6)
    assert got.lambda4 == pytest.approx(want.lambda4, rel=1e-6)


@pytest.mark.parametrize("a", [1e-3, 1.0, 5.0, 1e3])
def test_quadrature_oracle_keeps_bargmann_fock_flag(a):
    assert moments_by_quadrature(SquaredExponential(a)).is_bargmann_fock


# --- JSON ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "model",
    [Matern(4.0, 1.0), SquaredExponential(5.0), DiscreteSchoenberg(((0.5, 1.0), (0.5, 3.0))),
     ExplicitMoments(1.0, 3.0)],
)
def test_json_round_trip(model, tmp_path):
    obj = model_to_json(model)
    assert model_from_json(obj) == model
    assert model_from_json(json.dumps(obj)) == model
    path = tmp_path / "m.json"
    path.write_text(json.dumps(obj))
    assert model_from_json(f"@{path}") == model


def test_json_reference_shapes():
    assert model_from_json('{"model":"matern","nu":4,"ell":1}') == Matern(4.0, 1.0)
    assert model_from_json('{"model":"bargmann_fock","a":5}') == SquaredExponential(5.0)
    assert model_from_json({"model": "mixture", "atoms": [[0.5, 1], [0.5, 3]]}) == DiscreteSchoenberg(
        ((0.5, 1.0), (0.5, 3.0))
    )


@pytest.mark.parametrize(
    "text",
    ["{", "[]", '{"nu": 4}', '{"model": "cauchy"}', '{"model": "matern"}', '{"model": "matern", "nu": 1}'],
)
def test_json_errors(text):
    with pytest.raises(ModelError):
        model_from_json(text)
