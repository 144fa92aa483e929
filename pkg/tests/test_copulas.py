import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from scipy import integrate, stats

from copulachain import (
    BadWeights,
    Clayton,
    FrechetM,
    Gumbel,
    Independence,
    InvalidSpec,
    MarshallOlkin,
    Mixture,
    OutOfRangeParameter,
    StudentT,
    cdf,
    conditional_cdf,
    density,
    describe,
    inverse_conditional,
    validate,
)

from conftest import ALL_FAMILIES, CONTINUOUS, family_id


# --- worked examples -----------------------------------------------------------


def test_independence_cdf():
    assert cdf(Independence(), 0.3, 0.7) == pytest.approx(0.21, abs=1e-15)


def test_clayton_cdf_at_center():
    # (2 + 2 - 1)^(-1)
    assert cdf(Clayton(1), 0.5, 0.5) == pytest.approx(1 / 3, abs=1e-15)


def test_gumbel_uniform_margin():
    assert cdf(Gumbel(2), 0.3, 1.0) == 0.3


def test_marshall_olkin_zero_is_product(rng):
    u, v = rng.random(50), rng.random(50)
    assert np.allclose(cdf(MarshallOlkin(0, 0), u, v), u * v, atol=1e-15)


def test_conditional_examples():
    u, v = 0.37, np.linspace(0, 1, 11)
    assert np.allclose(conditional_cdf(Independence(), u, v), v, atol=1e-15)
    assert conditional_cdf(Clayton(1), 0.5, 0.5) == pytest.approx(4 / 9, abs=1e-14)
    assert conditional_cdf(FrechetM(), 0.3, 0.5) == 1.0
    assert conditional_cdf(FrechetM(), 0.3, 0.2) == 0.0


def test_density_examples():
    assert density(Independence(), 0.2, 0.9) == (1.0, False)
    value, flag = density(Clayton(1), 0.5, 0.5)
    assert value == pytest.approx(32 / 27, abs=1e-13) and flag is False
    assert density(FrechetM(), 0.4, 0.6) == (0.0, True)


def test_singular_flags():
    assert MarshallOlkin(0.5, 0.5).has_singular_part
    assert not MarshallOlkin(0.0, 0.0).has_singular_part
    assert Mixture((Independence(), FrechetM()), (0.5, 0.5)).has_singular_part
    assert not Mixture((Independence(), Clayton(2)), (0.5, 0.5)).has_singular_part


def test_inverse_examples():
    assert inverse_conditional(Independence(), 0.8, 0.123) == 0.123
    assert inverse_conditional(Clayton(1), 0.5, 4 / 9, 1e-12) == pytest.approx(0.5, abs=1e-12)
    assert inverse_conditional(FrechetM(), 0.3, 0.5) == 0.3


# --- independent oracles -------------------------------------------------------

SMOOTH = [Clayton(1.0), Clayton(4.0), Gumbel(2.0), Gumbel(1.4), MarshallOlkin(0.4, 0.7)]


@pytest.mark.parametrize("spec", SMOOTH, ids=family_id)
def test_conditional_is_derivative_of_cdf(spec):
    h = 1e-6
    for u, v in [(0.2, 0.7), (0.5, 0.3), (0.8, 0.9), (0.35, 0.15)]:
        if isinstance(spec, MarshallOlkin) and abs(v**spec.alpha - u**spec.beta) < 0.05:
            continue
        fd = (cdf(spec, u + h, v) - cdf(spec, u - h, v)) / (2 * h)
        assert conditional_cdf(spec, u, v) == pytest.approx(fd, abs=1e-7)


@pytest.mark.parametrize("spec", SMOOTH, ids=family_id)
def test_density_is_mixed_derivative(spec):
    h = 1e-6
    for u, v in [(0.2, 0.7), (0.5, 0.3), (0.8, 0.9), (0.35, 0.15)]:
        if isinstance(spec, MarshallOlkin) and abs(v**spec.alpha - u**spec.beta) < 0.05:
            continue
        fd = (conditional_cdf(spec, u, v + h) - conditional_cdf(spec, u, v - h)) / (2 * h)
        assert density(spec, u, v)[0] == pytest.approx(fd, rel=1e-6, abs=1e-7)


def _bivariate_t_cdf(a, b, rho, nu):
    """Bivariate t probability of (-inf, a] x (-inf, b], integrated after x = tan(s)."""

    def integrand(t, s):
        x, y = math.tan(s), math.tan(t)
        q = (x * x - 2 * rho * x * y + y * y) / (nu * (1 - rho * rho))
        pdf = (1 + q) ** (-(nu + 2) / 2) / (2 * math.pi * math.sqrt(1 - rho * rho))
        return pdf * (1 + x * x) * (1 + y * y)

    lo = -math.pi / 2
    value, _ = integrate.dblquad(integrand, lo, math.atan(a), lo, math.atan(b), epsabs=1e-10, epsrel=1e-10)
    return value


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
@pytest.mark.parametrize("rho, nu", [(0.5, 3.0), (-0.3, 6.0), (0.9, 2.5)])
@pytest.mark.parametrize("u, v", [(0.3, 0.6), (0.05, 0.9), (0.7, 0.7), (0.5, 0.5)])
def test_student_cdf_against_bivariate_t_integral(rho, nu, u, v):
    a, b = stats.t.ppf([u, v], nu)
    assert cdf(StudentT(rho, nu), u, v) == pytest.approx(_bivariate_t_cdf(a, b, rho, nu), abs=1e-9)


@pytest.mark.parametrize("rho", [0.5, -0.3, 0.9])
def test_student_orthant_probability(rho):
    want = 0.25 + math.asin(rho) / (2 * math.pi)
    assert cdf(StudentT(rho, 3.0), 0.5, 0.5) == pytest.approx(want, abs=1e-9)


def test_student_density_matches_scipy():
    spec = StudentT(0.5, 3.0)
    mvt = stats.multivariate_t(loc=[0, 0], shape=[[1, 0.5], [0.5, 1]], df=3.0)
    for u, v in [(0.1, 0.2), (0.5, 0.5), (0.9, 0.3), (0.01, 0.99)]:
        x, y = stats.t.ppf([u, v], 3.0)
        want = mvt.pdf([x, y]) / (stats.t.pdf(x, 3.0) * stats.t.pdf(y, 3.0))
        assert density(spec, u, v)[0] == pytest.approx(want, rel=1e-10)


def test_student_conditional_integrates_density():
    spec = StudentT(0.5, 3.0)
    for u, v in [(0.2, 0.4), (0.6, 0.9), (0.95, 0.5)]:
        want, _ = integrate.quad(lambda s: spec.density(u, s), 0, v, epsabs=1e-12, limit=200)
        assert conditional_cdf(spec, u, v) == pytest.approx(want, abs=1e-9)


# --- invariants ----------------------------------------------------------------


@pytest.mark.parametrize("spec", ALL_FAMILIES, ids=family_id)
def test_boundary_conditions(spec, rng):
    x = rng.random(20)
    assert np.all(cdf(spec, x, 0.0) == 0) and np.all(cdf(spec, 0.0, x) == 0)
    assert np.allclose(cdf(spec, x, 1.0), x, atol=1e-10)
    assert np.allclose(cdf(spec, 1.0, x), x, atol=1e-10)


@pytest.mark.parametrize("spec", ALL_FAMILIES, ids=family_id)
def test_rectangle_volumes_nonnegative(spec, rng):
    for _ in range(15):
        u1, u2 = np.sort(rng.random(2))
        v1, v2 = np.sort(rng.random(2))
        vol = cdf(spec, u2, v2) - cdf(spec, u1, v2) - cdf(spec, u2, v1) + cdf(spec, u1, v1)
        assert vol >= -1e-12


@pytest.mark.parametrize("spec", ALL_FAMILIES, ids=family_id)
def test_conditional_monotone_in_v(spec, rng):
    v = np.linspace(0, 1, 1000)
    for u in rng.random(3):
        c = conditional_cdf(spec, u, v)
        assert np.all(np.diff(c) >= 0)
        assert c[0] == 0.0 and c[-1] == 1.0


@pytest.mark.parametrize("spec", CONTINUOUS, ids=family_id)
def test_inverse_round_trip(spec, rng):
    tol = 1e-12
    for u, p in rng.random((20, 2)):
        v = inverse_conditional(spec, u, p, tol)
        assert conditional_cdf(spec, u, v) == pytest.approx(p, abs=10 * tol)


def test_inverse_at_marshall_olkin_jump():
    spec = MarshallOlkin(0.5, 0.5)
    u = 0.3
    v_star = u ** (spec.beta / spec.alpha)  # singular curve v^alpha = u^beta
    below = conditional_cdf(spec, u, v_star * (1 - 1e-9))
    at = conditional_cdf(spec, u, v_star)
    assert at - below > 0.1
    p = 0.5 * (below + at)
    assert inverse_conditional(spec, u, p, 1e-12) == pytest.approx(v_star, abs=1e-12)


def test_mixture_inverse_jump():
    spec = Mixture((Independence(), FrechetM()), (0.5, 0.5))
    # conditional is v/2 below u and v/2 + 1/2 from u on
    assert inverse_conditional(spec, 0.4, 0.5, 1e-12) == pytest.approx(0.4, abs=1e-12)
    assert inverse_conditional(spec, 0.4, 0.1, 1e-12) == pytest.approx(0.2, abs=1e-12)
    assert inverse_conditional(spec, 0.4, 0.8, 1e-12) == pytest.approx(0.6, abs=1e-12)


@pytest.mark.parametrize("spec", [s for s in ALL_FAMILIES if isinstance(s, Mixture)], ids=family_id)
def test_mixture_linearity(spec, rng):
    u, v = rng.random(10), rng.random(10)
    want = sum(w * c.cdf(u, v) for c, w in zip(spec.components, spec.weights))
    assert np.allclose(cdf(spec, u, v), want, rtol=0, atol=1e-14)
    want_c = sum(w * c.conditional_cdf(u, v) for c, w in zip(spec.components, spec.weights))
    assert np.allclose(conditional_cdf(spec, u, v), want_c, rtol=0, atol=1e-14)


@pytest.mark.parametrize(
    "spec",
    [s for s in ALL_FAMILIES if not (isinstance(s, MarshallOlkin) and s.alpha != s.beta)],
    ids=family_id,
)
def test_exchangeable(spec, rng):
    u, v = rng.random(10), rng.random(10)
    assert np.allclose(cdf(spec, u, v), cdf(spec, v, u), rtol=0, atol=1e-12)


def test_asymmetric_marshall_olkin_is_not_exchangeable():
    spec = MarshallOlkin(0.2, 0.8)
    assert abs(cdf(spec, 0.3, 0.6) - cdf(spec, 0.6, 0.3)) > 1e-3


def test_clayton_extreme_arguments_are_finite():
    spec = Clayton(20.0)
    u = np.array([1e-300, 1e-20, 0.5, 1 - 1e-16])
    assert np.all(np.isfinite(cdf(spec, u, u[::-1])))
    assert np.all(np.isfinite(conditional_cdf(spec, u, u[::-1])))
    assert np.all(np.isfinite(density(spec, u, u[::-1])[0]))


def test_threads_agree():
    specs = [Clayton(2.0), StudentT(0.5, 3.0), Gumbel(3.0)]
    pts = [(0.2, 0.4), (0.6, 0.7)]

    def work(spec):
        return [spec.cdf(u, v) for u, v in pts]

    serial = [work(s) for s in specs]
    with ThreadPoolExecutor(4) as pool:
        assert list(pool.map(work, specs)) == serial


# --- validation ----------------------------------------------------------------


@pytest.mark.parametrize(
    "raw, param",
    [
        ({"family": "clayton", "theta": -0.5}, "theta"),
        ({"family": "clayton", "theta": 0}, "theta"),
        ({"family": "gumbel", "beta": 0.5}, "beta"),
        ({"family": "student_t", "rho": 1.0, "nu": 3}, "rho"),
        ({"family": "student_t", "rho": 0.2, "nu": 2.0}, "nu"),
        ({"family": "marshall_olkin", "alpha": 1.5, "beta": 0.2}, "alpha"),
        ({"family": "marshall_olkin", "alpha": 0.5, "beta": -0.1}, "beta"),
    ],
)
def test_out_of_range(raw, param):
    with pytest.raises(OutOfRangeParameter) as info:
        validate(raw)
    assert info.value.parameter == param
    assert param in str(info.value)


def test_gumbel_message_cites_range():
    with pytest.raises(OutOfRangeParameter, match=r"\[1, inf\)"):
        validate({"family": "gumbel", "beta": 0.5})


def test_valid_mixture():
    spec = validate({"family": "mixture", "components": [{"family": "independence"}, {"family": "frechet_m"}], "weights": [0.5, 0.5]})
    assert spec == Mixture((Independence(), FrechetM()), (0.5, 0.5))
    assert validate(describe(spec)) == spec


def test_weights_renormalized_within_tolerance():
    spec = Mixture((Independence(), FrechetM()), (0.5, 0.5 + 5e-13))
    assert sum(spec.weights) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("weights", [(0.6, 0.5), (1.2, -0.2), (0.5, 0.5 + 1e-9)])
def test_bad_weights(weights):
    with pytest.raises(BadWeights):
        Mixture((Independence(), FrechetM()), weights)


def test_mixture_depth_limit():
    spec = Independence()
    for _ in range(4):
        spec = Mixture((spec, FrechetM()), (0.5, 0.5))
    assert spec.depth() == 4
    with pytest.raises(InvalidSpec):
        Mixture((spec, FrechetM()), (0.5, 0.5))


@pytest.mark.parametrize(
    "raw",
    [
        {"family": "frank", "theta": 1},
        {"family": "clayton"},
        {"family": "clayton", "theta": "one"},
        {"family": "clayton", "theta": 1, "beta": 2},
        {"family": "mixture", "components": [], "weights": []},
        "clayton",
    ],
)
def test_malformed_descriptions(raw):
    with pytest.raises(InvalidSpec):
        validate(raw)


def test_out_of_unit_square_rejected():
    with pytest.raises(ValueError):
        cdf(Clayton(1), 1.2, 0.5)
