import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from monosched.channel import Deterministic, Discrete
from monosched.errors import ConfigError, EmptyHorizon, NonPositiveGain, TableMismatch
from monosched.policies import (
    EnergyState,
    PolicyKind,
    PolicySpec,
    QueueState,
    causal_dual_energy,
    causal_primal_bits,
    deadline_flush,
    equal_bit,
    noncausal_dual,
    noncausal_primal,
    noncausal_primal_bits,
    policy_from_dict,
    slot_bits,
    slot_energy,
)
from monosched.thresholds import MonomialCost, TableKind, xi_table, zeta_table

TWO_ATOM = Discrete(((1.0, 0.5), (4.0, 0.5)))


def primal_spec(model, n, T=10):
    cost = MonomialCost(n)
    return PolicySpec(PolicyKind.CAUSAL_PRIMAL, cost, xi_table(model, cost, T))


def test_slot_energy_examples():
    assert slot_energy(0.0, 3.0, MonomialCost(2)) == 0.0
    assert slot_energy(2.0, 4.0, MonomialCost(2)) == 1.0
    assert slot_energy(2.0, 1.0, MonomialCost(2.67)) == pytest.approx(math.exp(2.67 * math.log(2.0)), rel=1e-14)
    assert slot_energy(2.0, 1.0, MonomialCost(2.67)) == pytest.approx(6.3643, abs=1e-4)
    with pytest.raises(NonPositiveGain):
        slot_energy(1.0, 0.0, MonomialCost(2))


def test_slot_bits_examples():
    assert slot_bits(0.0, 3.0, MonomialCost(2)) == 0.0
    assert slot_bits(1.0, 4.0, MonomialCost(2)) == 2.0
    with pytest.raises(NonPositiveGain):
        slot_bits(1.0, -1.0, MonomialCost(2))


@pytest.mark.parametrize("b", [0.1, 1.0, 10.0])
@pytest.mark.parametrize("n", [1.5, 2.0, 2.67, 7.0])
def test_slot_maps_invert(b, n):
    cost = MonomialCost(n)
    assert slot_bits(slot_energy(b, 0.37, cost), 0.37, cost) == pytest.approx(b, rel=1e-12)


def test_policy_spec_checks_tables():
    cost = MonomialCost(2)
    xi = xi_table(TWO_ATOM, cost, 3)
    with pytest.raises(TableMismatch):
        PolicySpec(PolicyKind.CAUSAL_PRIMAL, cost)
    with pytest.raises(TableMismatch):
        PolicySpec(PolicyKind.CAUSAL_DUAL, cost, xi)
    with pytest.raises(TableMismatch):
        PolicySpec(PolicyKind.CAUSAL_PRIMAL, MonomialCost(3), xi)
    with pytest.raises(TableMismatch):
        PolicySpec(PolicyKind.EQUAL_BIT, cost, xi)
    spec = PolicySpec("causal_primal", cost, xi)
    assert spec.kind is PolicyKind.CAUSAL_PRIMAL
    with pytest.raises(TableMismatch):
        causal_primal_bits(QueueState(1.0, 6), 1.0, spec)
    with pytest.raises(TableMismatch):
        causal_dual_energy(EnergyState(1.0, 2), 1.0, spec)


def test_causal_primal_examples():
    spec = primal_spec(TWO_ATOM, 2)
    assert causal_primal_bits(QueueState(7.0, 1), 0.01, spec) == 7.0
    assert causal_primal_bits(QueueState(10.0, 2), 1.0, spec) == pytest.approx(10 / 2.6, rel=1e-15)
    det = primal_spec(Deterministic(2.5), 2.67)
    for t in range(1, 11):
        assert causal_primal_bits(QueueState(3.0, t), 2.5, det) == pytest.approx(3.0 / t, rel=1e-13)


def test_causal_primal_zero_queue():
    spec = primal_spec(TWO_ATOM, 2)
    assert causal_primal_bits(QueueState(0.0, 4), 1.0, spec) == 0.0


def test_causal_dual_examples():
    cost = MonomialCost(2)
    det = PolicySpec(PolicyKind.CAUSAL_DUAL, cost, zeta_table(Deterministic(1.0), cost, 4))
    assert causal_dual_energy(EnergyState(3.0, 1), 0.2, det) == 3.0
    assert causal_dual_energy(EnergyState(8.0, 4), 1.0, det) == pytest.approx(2.0, rel=1e-14)
    two = PolicySpec(PolicyKind.CAUSAL_DUAL, cost, zeta_table(TWO_ATOM, cost, 2))
    assert causal_dual_energy(EnergyState(10.0, 2), 4.0, two) == pytest.approx(6.4, rel=1e-14)


def test_causal_rules_accept_arrays():
    spec = primal_spec(TWO_ATOM, 2.67)
    g = np.array([0.5, 1.0, 4.0])
    beta = np.array([1.0, 2.0, 3.0])
    batch = causal_primal_bits(QueueState(beta, 3), g, spec)
    single = [causal_primal_bits(QueueState(b, 3), x, spec) for b, x in zip(beta, g)]
    np.testing.assert_array_equal(batch, single)


def test_noncausal_examples():
    assert noncausal_primal(6.0, [2.0, 2.0, 2.0], MonomialCost(2.67)).tolist() == pytest.approx([2.0, 2.0, 2.0])
    np.testing.assert_allclose(noncausal_primal(10.0, [4.0, 1.0], MonomialCost(2)), [8.0, 2.0], rtol=1e-15)
    np.testing.assert_allclose(noncausal_dual(10.0, [4.0, 1.0], MonomialCost(2)), [8.0, 2.0], rtol=1e-15)
    np.testing.assert_allclose(noncausal_dual(5.0, [0.7] * 5, MonomialCost(3)), [1.0] * 5, rtol=1e-15)
    with pytest.raises(EmptyHorizon):
        noncausal_primal(1.0, [], MonomialCost(2))
    with pytest.raises(NonPositiveGain):
        noncausal_dual(1.0, [1.0, 0.0], MonomialCost(2))


def test_noncausal_cubic_against_convex_solver():
    gains = np.array([8.0, 1.0])
    cost = MonomialCost(3)
    closed = noncausal_primal(10.0, gains, cost)
    np.testing.assert_allclose(closed, [7.387961250362586, 2.612038749637414], rtol=1e-14)
    res = minimize(
        lambda b: np.sum(np.abs(b) ** 3 / gains),
        x0=[5.0, 5.0],
        constraints=[{"type": "eq", "fun": lambda b: b.sum() - 10.0}],
        bounds=[(0, 10)] * 2,
        method="SLSQP",
        options={"ftol": 1e-14},
    )
    np.testing.assert_allclose(closed, res.x, rtol=1e-6)


def test_noncausal_sum_is_pinned():
    rng = np.random.default_rng(0)
    for _ in range(200):
        gains = rng.uniform(0.01, 50.0, rng.integers(1, 30))
        B = float(rng.uniform(0.1, 1e6))
        alloc = noncausal_primal(B, gains, MonomialCost(float(rng.uniform(1.1, 10))))
        assert np.all(alloc >= 0)
        assert math.fsum(alloc) == pytest.approx(B, rel=1e-15)


def test_noncausal_queue_form_matches_budget_form():
    gains = [3.0, 0.4, 1.2, 2.2]
    cost = MonomialCost(2.67)
    alloc = noncausal_primal(5.0, gains, cost)
    beta = 5.0
    for j in range(len(gains)):
        b = noncausal_primal_bits(QueueState(beta, len(gains) - j), gains[j:], cost)
        assert b == pytest.approx(alloc[j], rel=1e-12)
        beta -= b


def test_equal_bit_and_flush():
    assert equal_bit(QueueState(10.0, 5)) == 2.0
    assert equal_bit(QueueState(3.3, 1)) == 3.3
    beta, served = 12.0, []
    for t in range(6, 0, -1):
        b = equal_bit(QueueState(beta, t))
        served.append(b)
        beta -= b
    assert served == pytest.approx([2.0] * 6)
    assert deadline_flush(QueueState(4.0, 3)) == 0.0
    assert deadline_flush(QueueState(4.0, 1)) == 4.0


@settings(max_examples=200, deadline=None)
@given(
    beta=st.floats(0.01, 1e3),
    lam=st.floats(0.01, 100.0),
    g=st.floats(0.01, 100.0),
    n=st.sampled_from([1.5, 2.0, 2.67, 5.0, 20.0]),
    t=st.integers(2, 8),
)
def test_causal_primal_properties(beta, lam, g, n, t):
    spec = primal_spec(TWO_ATOM, n)
    b = causal_primal_bits(QueueState(beta, t), g, spec)
    assert 0 <= b <= beta
    # linear in the queue
    assert causal_primal_bits(QueueState(lam * beta, t), g, spec) == pytest.approx(lam * b, rel=1e-13)
    # strictly more bits on a better channel
    assert causal_primal_bits(QueueState(beta, t), g * 1.01, spec) > b
    # allocation ratio identity: b * eta_t = (beta - b) * g**(1/(n-1))
    eta = spec.table.eta[t - 2]
    assert b * eta == pytest.approx((beta - b) * g ** (1 / (n - 1)), rel=1e-12)
    # stationarity of b^n/g + xi_{t-1} (beta-b)^n
    now = n * b ** (n - 1) / g
    later = n * (beta - b) ** (n - 1) * spec.table.value(t - 1)
    assert now == pytest.approx(later, rel=1e-8)


@pytest.mark.parametrize("t", [2, 3, 4, 5])
def test_quadratic_ratio(t):
    spec = primal_spec(TWO_ATOM, 2)
    for g in (0.3, 1.0, 4.0, 9.0):
        b = causal_primal_bits(QueueState(5.0, t), g, spec)
        assert b / (5.0 - b) == pytest.approx(g * spec.table.value(t - 1), rel=1e-13)


def test_deterministic_policies_agree():
    from monosched.montecarlo import run_episode

    cost = MonomialCost(2.67)
    gains = [1.7] * 6
    causal = run_episode(primal_spec(Deterministic(1.7), 2.67), gains, 9.0, cost)
    nonc = run_episode(PolicySpec(PolicyKind.NONCAUSAL_PRIMAL, cost), gains, 9.0, cost)
    eq = run_episode(PolicySpec(PolicyKind.EQUAL_BIT, cost), gains, 9.0, cost)
    np.testing.assert_allclose(causal.allocations, nonc.allocations, rtol=1e-13)
    np.testing.assert_allclose(eq.allocations, nonc.allocations, rtol=1e-13)


@settings(max_examples=100, deadline=None)
@given(
    gains=st.lists(st.floats(0.01, 100.0), min_size=1, max_size=16),
    n=st.floats(1.2, 20.0),
)
def test_noncausal_proportions(gains, n):
    cost = MonomialCost(n)
    bits = noncausal_primal(3.0, gains, cost)
    energy = noncausal_dual(7.0, gains, cost)
    w = np.array(gains) ** (1 / (n - 1))
    np.testing.assert_allclose(bits / 3.0, w / w.sum(), rtol=1e-12, atol=1e-300)
    np.testing.assert_allclose(bits / 3.0, energy / 7.0, rtol=1e-12, atol=1e-300)


def test_policy_from_dict(tmp_path):
    cost = MonomialCost(2)
    table = xi_table(TWO_ATOM, cost, 4)
    path = tmp_path / "xi.csv"
    path.write_text(table.to_csv())
    spec = policy_from_dict({"kind": "causal_primal", "n": 2, "table": str(path)})
    assert spec.table.values == table.values
    built = policy_from_dict({"kind": "causal_dual"}, cost, lambda kind, c: zeta_table(TWO_ATOM, c, 3))
    assert built.table.kind is TableKind.DUAL_ZETA
    assert policy_from_dict({"kind": "equal_bit", "n": 3}).cost.n == 3.0
    with pytest.raises(ConfigError):
        policy_from_dict({"kind": "greedy"}, cost)
    with pytest.raises(ConfigError):
        policy_from_dict({"kind": "equal_bit"})
    with pytest.raises(TableMismatch):
        policy_from_dict({"kind": "causal_primal"}, cost)
