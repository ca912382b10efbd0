import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from monosched.channel import (
    Deterministic,
    Discrete,
    QuadratureConfig,
    SeededStream,
    TabulatedPdf,
    TruncatedExponential,
    adaptive_gauss_legendre,
    expect,
    model_from_dict,
    quantize,
    sample,
    validate,
)
from monosched.errors import DivergentInverseMoment, ModelError, NonPositiveSupport, QuadratureNotConverged

EULER_GAMMA = 0.57721566490153286061
FINE_GRID = np.linspace(0.2, 3.0, 2801)


def exp_integral_e1(x, terms=60):
    """E1(x) = -gamma - ln x - sum_k (-x)^k / (k k!), independent of any quadrature."""
    total, term = 0.0, 1.0
    for k in range(1, terms):
        term *= -x / k
        total += term / k
    return -EULER_GAMMA - math.log(x) - total


def test_e1_oracle_sanity():
    # E1(1) = 0.21938393439552027 (standard table value)
    assert exp_integral_e1(1.0) == pytest.approx(0.21938393439552027, rel=1e-14)


def test_validate_accepts_basic_models(trunc_exp):
    assert validate(Deterministic(1.0)) == Deterministic(1.0)
    assert validate(trunc_exp) is trunc_exp


def test_untruncated_exponential_diverges():
    with pytest.raises(DivergentInverseMoment):
        validate(TruncatedExponential(0.0, 1.0))


@pytest.mark.parametrize(
    "build",
    [
        lambda: Deterministic(0.0),
        lambda: Deterministic(-2.0),
        lambda: Discrete(((1.0, 0.5), (0.0, 0.5))),
        lambda: TruncatedExponential(-0.1, 1.0),
        lambda: TabulatedPdf(((0.0, 1.0), (1.0, 1.0))),
    ],
)
def test_nonpositive_support_rejected(build):
    with pytest.raises(NonPositiveSupport):
        build()


def test_bad_parameters_rejected():
    with pytest.raises(ModelError):
        Discrete(((1.0, -0.1), (2.0, 1.1)))
    with pytest.raises(ModelError):
        TruncatedExponential(0.1, 0.0)
    with pytest.raises(ModelError):
        Discrete(())


def test_discrete_probabilities_normalized():
    m = Discrete(((1.0, 2.0), (3.0, 6.0)))
    assert math.fsum(p for _, p in m.atoms) == pytest.approx(1.0, abs=1e-15)
    assert m.atoms[0][1] == 0.25


def test_expect_examples(two_atom, trunc_exp):
    assert expect(Deterministic(1.0), lambda g: 1.0 / g) == 1.0
    assert expect(two_atom, lambda g: 1.0 / g) == 0.625
    oracle = math.exp(0.001) * exp_integral_e1(0.001)
    # quoted as 6.337 to three decimals (truncated)
    assert oracle == pytest.approx(6.337, abs=1e-3)
    assert expect(trunc_exp, lambda g: 1.0 / g) == pytest.approx(oracle, rel=1e-10)


def test_discrete_expect_is_exact_weighted_sum():
    m = Discrete(((0.3, 0.1), (1.7, 0.2), (2.9, 0.3), (5.0, 0.4)))
    f = lambda g: np.sqrt(g) + 1.0 / g
    exact = math.fsum(p * (math.sqrt(g) + 1.0 / g) for g, p in m.atoms)
    assert expect(m, f) == exact


@pytest.mark.parametrize(
    "model",
    [
        TruncatedExponential(0.001, 1.0),
        TruncatedExponential(0.5, 3.0),
        TabulatedPdf(((0.1, 0.0), (1.0, 2.0), (2.0, 1.0), (4.0, 0.0))),
    ],
)
def test_continuous_total_mass_is_one(model):
    assert expect(model, np.ones_like) == pytest.approx(1.0, abs=1e-9)


def test_truncated_exponential_moments(trunc_exp):
    # g = 0.001 + X with X ~ Exp(1): E[g] = 1.001, E[g^2] = 0.001^2 + 2*0.001 + 2
    assert expect(trunc_exp, lambda g: g) == pytest.approx(1.001, rel=1e-10)
    assert expect(trunc_exp, lambda g: g**2) == pytest.approx(2.002001, rel=1e-9)


def test_tabulated_uses_trapezoid_on_grid():
    m = TabulatedPdf(((1.0, 1.0), (2.0, 1.0), (3.0, 2.0)))
    g = np.array([1.0, 2.0, 3.0])
    d = np.array([1.0, 1.0, 2.0]) / 2.5
    assert expect(m, lambda x: x) == pytest.approx(np.trapezoid(g * d, g), rel=1e-15)


def test_quadrature_failure_carries_estimate():
    cfg = QuadratureConfig(rel_tol=1e-15, abs_tol=1e-300, max_subdivisions=16)
    with pytest.raises(QuadratureNotConverged) as info:
        adaptive_gauss_legendre(lambda u: np.sin(200 * u) ** 2, 0.0, 1.0, cfg)
    assert 0.3 < info.value.estimate < 0.7
    assert info.value.error > 0


def test_quadrature_config_rejects_bad_values():
    with pytest.raises(ValueError):
        QuadratureConfig(rel_tol=0.0)
    with pytest.raises(ValueError):
        QuadratureConfig(max_subdivisions=8)


def test_sample_examples():
    assert sample(Deterministic(2.0), SeededStream(5, 1), 3).tolist() == [2.0, 2.0, 2.0]
    assert sample(Discrete(((1.0, 1.0),)), SeededStream(5, 1), 5).tolist() == [1.0] * 5


def test_sampling_is_deterministic(trunc_exp):
    a = sample(trunc_exp, SeededStream(99, 7), 1000)
    b = sample(trunc_exp, SeededStream(99, 7), 1000)
    c = sample(trunc_exp, SeededStream(99, 8), 1000)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_seeded_stream_bounds():
    with pytest.raises(ValueError):
        SeededStream(-1)
    with pytest.raises(ValueError):
        SeededStream(2**64)
    SeededStream(2**64 - 1, 3).uniforms(2)


def test_discrete_sampling_frequencies(two_atom):
    draws = sample(two_atom, SeededStream(3), 200_000)
    assert set(np.unique(draws)) == {1.0, 4.0}
    assert np.mean(draws == 4.0) == pytest.approx(0.5, abs=4 * math.sqrt(0.25 / 200_000))


def test_inverse_moment_monte_carlo_matches_quadrature(trunc_exp):
    draws = 1.0 / sample(trunc_exp, SeededStream(2024), 10_000_000)
    se = draws.std(ddof=1) / math.sqrt(draws.size)
    assert abs(draws.mean() - expect(trunc_exp, lambda g: 1.0 / g)) <= 3 * se


@pytest.mark.parametrize(
    "f",
    [lambda g: 1.0 / g, np.sqrt, lambda g: g ** (1.0 / 1.67)],
    ids=["inverse", "sqrt", "root_n267"],
)
@pytest.mark.parametrize(
    "model",
    [
        TruncatedExponential(0.001, 1.0),
        Discrete(((0.5, 0.2), (1.0, 0.3), (3.0, 0.5))),
        TabulatedPdf(tuple(zip(FINE_GRID, np.interp(FINE_GRID, [0.2, 1.0, 3.0], [0.0, 1.0, 0.0])))),
    ],
    ids=["trunc_exp", "discrete", "tabulated"],
)
def test_monte_carlo_consistency(model, f):
    values = f(sample(model, SeededStream(11, 0), 1_000_000))
    se = values.std(ddof=1) / math.sqrt(values.size)
    exact = expect(model, f)
    if isinstance(model, TabulatedPdf):
        # trapezoid rule on the grid vs the piecewise-linear sampling density
        se += 1e-5 * abs(exact)
    assert abs(values.mean() - exact) <= 4 * se


def test_tabulated_quantile_inverts_cdf():
    m = TabulatedPdf(((0.2, 0.0), (1.0, 1.0), (3.0, 0.0)))
    q = np.linspace(0, 1, 11)
    g = m.quantile(q)
    assert g[0] == pytest.approx(0.2)
    assert g[-1] == pytest.approx(3.0)
    assert np.all(np.diff(g) > 0)
    # mass below the peak is 0.8 * 1 / 2 / total, total = 1.4
    assert m.quantile(np.array([0.4 / 1.4 * 1.0]))[0] == pytest.approx(1.0, rel=1e-12)


def test_quantize_equal_probability(trunc_exp, two_atom):
    g, p = quantize(trunc_exp, 16)
    assert len(g) == 16 and np.all(np.diff(g) > 0)
    assert p.sum() == pytest.approx(1.0)
    assert g[0] == pytest.approx(0.001 - math.log1p(-1 / 32))
    g2, p2 = quantize(two_atom, 16)
    assert g2.tolist() == [1.0, 4.0] and p2.tolist() == [0.5, 0.5]


@pytest.mark.parametrize(
    "doc, cls",
    [
        ({"kind": "truncated_exponential", "threshold": 0.001, "rate": 1.0}, TruncatedExponential),
        ({"kind": "deterministic", "c": 2}, Deterministic),
        ({"kind": "discrete", "atoms": [[1, 0.5], [4, 0.5]]}, Discrete),
        ({"kind": "tabulated_pdf", "grid": [[0.1, 0], [1, 1], [2, 0]]}, TabulatedPdf),
    ],
)
def test_model_json_round_trip(doc, cls):
    m = model_from_dict(doc)
    assert isinstance(m, cls)
    assert model_from_dict(m.to_dict()) == m


def test_model_json_errors():
    with pytest.raises(ModelError):
        model_from_dict({"kind": "rayleigh"})
    with pytest.raises(ModelError):
        model_from_dict({"kind": "deterministic"})
    with pytest.raises(ModelError):
        model_from_dict([1, 2])


@settings(max_examples=40, deadline=None)
@given(
    st.lists(
        st.tuples(st.floats(0.01, 100.0), st.floats(0.01, 1.0)), min_size=1, max_size=6
    )
)
def test_discrete_inverse_moment_finite(atoms):
    m = validate(Discrete(tuple(atoms)))
    assert math.isfinite(expect(m, lambda g: 1.0 / g))
