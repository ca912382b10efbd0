"""Independent checks of the closed-form schedulers.

Two engines live here, neither of which touches the threshold recursions or
the policy formulas:

* :func:`dp_solve_primal` / :func:`dp_solve_dual` run plain backward induction
  on a discretized state grid, with the gain distribution quantized to atoms.
* :func:`one_step_argmin` minimizes the single-slot objective by golden-section
  search.

Only the slot cost maps are shared with the rest of the package.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channel import FadingModel, quantize
from .errors import GridTooCoarse
from .policies import slot_bits, slot_energy
from .thresholds import MonomialCost, fmt

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class GridSpec:
    state_points: int = 256
    action_points: int = 256
    gain_atoms: int = 16
    state_max: float = 1.0
    min_fraction: float = 1e-4

    def __post_init__(self):
        for name in ("state_points", "action_points", "gain_atoms"):
            if getattr(self, name) < 8:
                raise ValueError(f"{name} must be at least 8")
        if not self.state_max > 0:
            raise ValueError("state_max must be positive")
        if not 0 < self.min_fraction < 1:
            raise ValueError("min_fraction must lie in (0, 1)")

    def states(self) -> np.ndarray:
        """0 followed by geometrically spaced points up to state_max."""
        geo = np.geomspace(self.state_max * self.min_fraction, self.state_max, self.state_points - 1)
        return np.concatenate([[0.0], geo])


@dataclass(frozen=True)
class DpSolution:
    """Value and greedy action per (t, state point, gain atom); index 0 is t = 1."""

    problem: str
    states: np.ndarray
    gains: np.ndarray
    probs: np.ndarray
    value: np.ndarray
    action: np.ndarray

    @property
    def horizon(self) -> int:
        return self.value.shape[0]

    def expected(self, t: int) -> np.ndarray:
        """Gain-averaged value at slot t over the state grid."""
        return self.value[t - 1] @ self.probs

    def expected_value(self, t: int, x: float) -> float:
        return float(np.interp(x, self.states, self.expected(t)))

    def greedy_action(self, t: int, x: float, atom: int) -> float:
        return float(np.interp(x, self.states, self.action[t - 1, :, atom]))

    def write_csv(self, path: str | Path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "state", "atom", "value", "action"])
            for ti in range(self.horizon):
                for si, x in enumerate(self.states):
                    for k in range(len(self.gains)):
                        writer.writerow(
                            [ti + 1, fmt(x), k, fmt(self.value[ti, si, k]), fmt(self.action[ti, si, k])]
                        )


def golden_section(phi, lo, hi, tol, maximize=False):
    """Vectorized golden-section search; each entry of lo/hi brackets its own problem."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    sign = -1.0 if maximize else 1.0
    width = float(np.max(hi - lo)) if lo.size else 0.0
    steps = 0 if width <= tol else int(math.ceil(math.log(tol / width) / math.log(INV_PHI)))
    c = hi - INV_PHI * (hi - lo)
    d = lo + INV_PHI * (hi - lo)
    fc = sign * phi(c)
    fd = sign * phi(d)
    for _ in range(steps):
        left = fc < fd
        hi = np.where(left, d, hi)
        lo = np.where(left, lo, c)
        new_c = hi - INV_PHI * (hi - lo)
        new_d = lo + INV_PHI * (hi - lo)
        c, d = np.where(left, new_c, d), np.where(left, c, new_d)
        f_new = sign * phi(np.where(left, c, d))
        fc, fd = np.where(left, f_new, fd), np.where(left, fc, f_new)
    return 0.5 * (lo + hi)


def _backward(model, cost, T, grid, problem):
    gains, probs = quantize(model, grid.gain_atoms)
    x = grid.states()
    S, K, A = len(x), len(gains), grid.action_points
    value = np.empty((T, S, K))
    action = np.empty((T, S, K))
    maximize = problem == "dual"
    stage = slot_bits if maximize else slot_energy
    for k, g in enumerate(gains):
        value[0, :, k] = stage(x, g, cost)
        action[0, :, k] = x
    frac = np.linspace(0.0, 1.0, A)
    cell = x / (A - 1)
    for t in range(2, T + 1):
        future = value[t - 2] @ probs
        for k, g in enumerate(gains):
            acts = x[:, None] * frac[None, :]
            obj = stage(acts, g, cost) + np.interp(x[:, None] - acts, x, future)
            j = np.argmax(obj, axis=1) if maximize else np.argmin(obj, axis=1)
            lo = np.maximum(acts[np.arange(S), j] - cell, 0.0)
            hi = np.minimum(acts[np.arange(S), j] + cell, x)

            def phi(a):
                return stage(a, g, cost) + np.interp(x - a, x, future)

            best = golden_section(phi, lo, hi, 1e-13 * grid.state_max, maximize=maximize)
            refined = phi(best)
            coarse = obj[np.arange(S), j]
            better = refined > coarse if maximize else refined < coarse
            action[t - 1, :, k] = np.where(better, best, acts[np.arange(S), j])
            value[t - 1, :, k] = np.where(better, refined, coarse)
        steps = np.diff(value[t - 1], axis=0)
        if np.any(steps < -1e-12 * np.abs(value[t - 1]).max()):
            raise GridTooCoarse(f"{problem} value at t={t} is not monotone in the state")
    return DpSolution(problem, x, gains, probs, value, action)


def dp_solve_primal(model: FadingModel, cost: MonomialCost, T: int, grid: GridSpec = GridSpec()) -> DpSolution:
    """Backward induction for the minimum expected energy.

    J_1(beta, g) = beta**n / g, and for t >= 2 the current slot cost plus the
    interpolated expected J_{t-1} at the leftover bits is minimized over an
    action grid, then polished by golden-section search.
    """
    return _backward(model, cost, T, grid, "primal")


def dp_solve_dual(model: FadingModel, cost: MonomialCost, T: int, grid: GridSpec = GridSpec()) -> DpSolution:
    """Backward induction for the maximum expected bits from an energy budget."""
    return _backward(model, cost, T, grid, "dual")


def _power_step(y: float, delta: float, n: float) -> float:
    # (y + delta)**n - y**n, with delta supplied exactly rather than as a rounded difference
    if delta == 0.0:
        return 0.0
    if y == 0.0 or y + delta == 0.0:
        return (y + delta) ** n - y**n
    return y**n * math.expm1(n * math.log1p(delta / y))


def one_step_argmin(beta: float, g: float, cost: MonomialCost, xi_prev: float) -> float:
    """Minimize b**n/g + xi_prev*(beta - b)**n over [0, beta] by golden-section search.

    Candidates are compared through the objective difference rebuilt from the
    exact gap between them, so the bracket can shrink to 1e-12*beta, well
    below the sqrt(machine epsilon) floor of comparing rounded objective values.
    """
    if not xi_prev > 0:
        raise ValueError("xi_prev must be positive")
    if beta == 0:
        return 0.0
    n = cost.n

    def diff(c, d):
        gap = c - d
        return _power_step(d, gap, n) / g + xi_prev * _power_step(beta - d, -gap, n)

    lo, hi = 0.0, float(beta)
    tol = 1e-12 * beta
    c = hi - INV_PHI * (hi - lo)
    d = lo + INV_PHI * (hi - lo)
    for _ in range(200):
        if hi - lo <= tol:
            break
        if diff(c, d) < 0:
            hi, d = d, c
            c = hi - INV_PHI * (hi - lo)
        else:
            lo, c = c, d
            d = lo + INV_PHI * (hi - lo)
    return 0.5 * (lo + hi)
