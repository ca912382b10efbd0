"""Invariant suites behind ``monosched verify``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .channel import Deterministic, Discrete, FadingModel, canonical_model
from .oracle import GridSpec, dp_solve_dual, dp_solve_primal, one_step_argmin
from .policies import PolicySpec, QueueState, causal_primal_bits, noncausal_dual, noncausal_primal
from .thresholds import MonomialCost, limit_gap, xi_table, zeta_table

DEFAULT_ORDERS = (1.5, 2.0, 2.67, 5.0, 20.0)

DEFAULT_TOLERANCES = {
    "strict": 1e-12,
    "closed_form": 1e-12,
    "limit_gap": 0.10,
    "first_order": 1e-8,
    "oracle": 1e-8,
    "ratio": 1e-12,
    "dp": 0.005,
}


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    observed: float
    expected: str

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name}: observed={self.observed:.6g} expected {self.expected}"


def two_atom() -> Discrete:
    return Discrete(((1.0, 0.5), (4.0, 0.5)))


def standard_models() -> dict[str, FadingModel]:
    return {"deterministic(1)": Deterministic(1.0), "two_atom": two_atom(), "trunc_exp": canonical_model()}


def threshold_suite(orders: Iterable[float] = DEFAULT_ORDERS, tol: dict | None = None, T: int = 50) -> list[Check]:
    tol = {**DEFAULT_TOLERANCES, **(tol or {})}
    out = []
    for label, model in standard_models().items():
        for n in orders:
            tb = xi_table(model, MonomialCost(n), T)
            xi = np.array(tb.values)
            eta = np.array(tb.eta)
            # largest relative step in the wrong direction; must stay below -strict
            worst_xi = float(np.max(np.diff(xi) / xi[:-1]))
            worst_eta = float(np.max(-np.diff(eta) / eta[1:]))
            out.append(Check(f"xi nonincreasing [{label}, n={n}]", worst_xi < -tol["strict"], worst_xi, f"< -{tol['strict']:g}"))
            out.append(Check(f"eta increasing [{label}, n={n}]", worst_eta < -tol["strict"], worst_eta, f"< -{tol['strict']:g}"))
    for c in (0.5, 1.0, 3.0):
        for n in (1.5, 2.0, 2.67, 5.0):
            t = np.arange(1, T + 1)
            xi = np.array(xi_table(Deterministic(c), MonomialCost(n), T).values)
            zeta = np.array(zeta_table(Deterministic(c), MonomialCost(n), T).values)
            dev = max(np.max(np.abs(xi * c * t ** (n - 1) - 1)), np.max(np.abs(zeta / (c * t ** (n - 1)) - 1)))
            out.append(Check(f"deterministic closed form [c={c}, n={n}]", dev <= tol["closed_form"], float(dev), f"<= {tol['closed_form']:g}"))
    for n in orders:
        tb = xi_table(Deterministic(1.0), MonomialCost(n), T)
        gap = max(limit_gap(tb, t) for t in range(1, T + 1))
        out.append(Check(f"limit gap deterministic(1) [n={n}]", gap == 0.0, gap, "== 0"))
    gaps = {}
    for n in (50.0, 100.0, 200.0):
        tb = xi_table(canonical_model(), MonomialCost(n), 5)
        gaps[n] = [limit_gap(tb, t) for t in range(1, 6)]
    worst = max(gaps[200.0])
    out.append(Check("limit gap trunc_exp n=200, t<=5", worst <= tol["limit_gap"], worst, f"<= {tol['limit_gap']:g}"))
    shrinking = all(gaps[50.0][i] > gaps[100.0][i] > gaps[200.0][i] for i in range(5))
    out.append(Check("limit gap shrinks n=50->100->200", shrinking, gaps[200.0][-1], "decreasing in n"))
    return out


def policy_suite(orders: Iterable[float] = DEFAULT_ORDERS, tol: dict | None = None, draws: int = 1000, seed: int = 2024) -> list[Check]:
    tol = {**DEFAULT_TOLERANCES, **(tol or {})}
    rng = np.random.default_rng(seed)
    orders = tuple(orders)
    tables = {}
    worst_foc = worst_oracle = worst_ratio = 0.0
    for _ in range(draws):
        n = float(rng.choice(orders))
        atoms = int(rng.integers(1, 6))
        gains = tuple(rng.uniform(0.2, 5.0, atoms).round(3))
        probs = tuple(rng.uniform(0.1, 1.0, atoms))
        t = int(rng.integers(2, 7))
        beta = float(rng.uniform(0.1, 10.0))
        g = float(rng.uniform(0.1, 10.0))
        key = (gains, probs, n)
        if key not in tables:
            tables[key] = xi_table(Discrete(tuple(zip(gains, probs))), MonomialCost(n), 6)
        tb = tables[key]
        cost = MonomialCost(n)
        spec = PolicySpec("causal_primal", cost, tb)
        b = float(causal_primal_bits(QueueState(beta, t), g, spec))
        xi_prev = tb.value(t - 1)
        marginal_now = n * b ** (n - 1) / g
        marginal_later = n * (beta - b) ** (n - 1) * xi_prev
        worst_foc = max(worst_foc, abs(marginal_now - marginal_later) / max(marginal_now, marginal_later))
        worst_oracle = max(worst_oracle, abs(one_step_argmin(beta, g, cost, xi_prev) - b) / beta)
        lhs = b * tb.scaled_state(t - 1)
        rhs = (beta - b) * float(cost.gain_root(g))
        worst_ratio = max(worst_ratio, abs(lhs - rhs) / max(abs(lhs), abs(rhs)))
    out = [
        Check("first-order condition residual", worst_foc <= tol["first_order"], worst_foc, f"<= {tol['first_order']:g}"),
        Check("one-step argmin vs causal policy", worst_oracle <= tol["oracle"], worst_oracle, f"<= {tol['oracle']:g} * beta"),
        Check("allocation ratio identity", worst_ratio <= tol["ratio"], worst_ratio, f"<= {tol['ratio']:g}"),
    ]
    worst_prop = worst_dual = 0.0
    for _ in range(draws):
        T = int(rng.integers(1, 17))
        n = float(rng.choice(orders))
        cost = MonomialCost(n)
        gains = rng.uniform(0.05, 20.0, T)
        B, E = float(rng.uniform(0.1, 100)), float(rng.uniform(0.1, 100))
        bits = noncausal_primal(B, gains, cost)
        energy = noncausal_dual(E, gains, cost)
        target = gains ** (1.0 / (n - 1.0))
        worst_prop = max(worst_prop, float(np.max(np.abs(bits / B / (target / target.sum()) - 1))))
        worst_dual = max(worst_dual, float(np.max(np.abs(bits / B - energy / E))))
    out.append(Check("non-causal bits proportional to g^(1/(n-1))", worst_prop <= tol["ratio"], worst_prop, f"<= {tol['ratio']:g}"))
    out.append(Check("non-causal bit and energy fractions agree", worst_dual <= tol["ratio"], worst_dual, f"<= {tol['ratio']:g}"))
    devs = []
    for n in (5.0, 20.0, 100.0):
        tb = xi_table(canonical_model(), MonomialCost(n), 10)
        spec = PolicySpec("causal_primal", MonomialCost(n), tb)
        devs.append(max(abs(float(causal_primal_bits(QueueState(1.0, t), 1.0, spec)) - 1.0 / t) for t in range(1, 11)))
    out.append(Check("equal-bit limit n=5->20->100", devs[0] > devs[1] > devs[2], devs[-1], "decreasing in n"))
    return out


def dp_suite(orders: Iterable[float] = (2.0, 2.67), tol: dict | None = None, grid_points: int = 256, T: int = 6) -> list[Check]:
    """Oracle value match; the default tolerance widens as (256/grid)**2 for coarse grids."""
    tol = {**DEFAULT_TOLERANCES, **(tol or {})}
    limit = tol["dp"] * max(1.0, (256.0 / grid_points) ** 2)
    grid = GridSpec(grid_points, grid_points, 16)
    model = two_atom()
    out = []
    for n in orders:
        cost = MonomialCost(n)
        xi = xi_table(model, cost, T).values
        sol = dp_solve_primal(model, cost, T, grid)
        err = max(abs(sol.expected_value(t, 1.0) / xi[t - 1] - 1) for t in range(1, T + 1))
        out.append(Check(f"dp primal value [n={n}, grid={grid_points}]", err <= limit, err, f"<= {limit:g}"))
    cost = MonomialCost(2.0)
    zeta = zeta_table(model, cost, 4).values
    sol = dp_solve_dual(model, cost, 4, grid)
    err = max(abs(sol.expected_value(t, 1.0) / zeta[t - 1] ** 0.5 - 1) for t in range(1, 5))
    out.append(Check(f"dp dual value [n=2, grid={grid_points}]", err <= limit, err, f"<= {limit:g}"))
    return out
