"""Seeded episode simulation and paired policy comparison.

Episode i always draws its gains from ``SeededStream(master_seed, i)``, and
every policy in an experiment is run on the same gain matrix, so policy
differences are paired and adding episodes never reshuffles earlier ones.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .channel import FadingModel, SeededStream
from .errors import TableMismatch
from .policies import (
    DUAL_KINDS,
    PRIMAL_KINDS,
    PolicyKind,
    PolicySpec,
    _causal,
    _proportional,
    slot_bits,
    slot_energy,
)
from .thresholds import MonomialCost, expected_dual_bits, expected_primal_cost, fmt


@dataclass
class EpisodeTrace:
    """One realization: gains g_T..g_1, per-slot allocations and per-slot outcomes.

    Primal traces allocate bits and record energy; dual traces allocate
    energy and record bits.
    """

    gains: np.ndarray
    allocations: np.ndarray
    per_slot_cost: np.ndarray
    total: float


@dataclass(frozen=True)
class ExperimentConfig:
    model: FadingModel
    cost: MonomialCost
    T: int
    budget: float
    policies: tuple[PolicySpec, ...]
    episodes: int
    master_seed: int
    problem: str = "primal"
    keep_totals: bool = False

    def __post_init__(self):
        if self.episodes < 1:
            raise ValueError("episodes must be at least 1")
        if self.T < 1:
            raise ValueError("horizon must be at least 1")
        if not (self.budget >= 0 and math.isfinite(self.budget)):
            raise ValueError("budget must be finite and nonnegative")
        if self.problem not in ("primal", "dual"):
            raise ValueError(f"problem must be 'primal' or 'dual', got {self.problem!r}")
        if not self.policies:
            raise ValueError("an experiment needs at least one policy")
        object.__setattr__(self, "policies", tuple(self.policies))
        for spec in self.policies:
            check_compatible(spec, self.problem, self.cost, self.T)


def check_compatible(spec: PolicySpec, problem: str, cost: MonomialCost, T: int):
    wrong = DUAL_KINDS if problem == "primal" else PRIMAL_KINDS
    if spec.kind in wrong:
        raise TableMismatch(f"{spec.name} cannot run in a {problem} experiment")
    if spec.cost.n != cost.n:
        raise TableMismatch(f"{spec.name} has n={spec.cost.n}, experiment has n={cost.n}")
    spec.check_horizon(T)


@dataclass(frozen=True)
class PolicyStats:
    name: str
    mean: float
    std_error: float
    min: float
    max: float
    episodes: int
    closed_form_prediction: float | None = None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "mean": self.mean,
            "std_error": self.std_error,
            "min": self.min,
            "max": self.max,
            "episodes": self.episodes,
            "closed_form_prediction": self.closed_form_prediction,
        }


@dataclass
class McSummary:
    problem: str
    stats: list[PolicyStats]
    totals: dict[str, np.ndarray] | None = field(default=None, repr=False)

    def __getitem__(self, name: str) -> PolicyStats:
        for s in self.stats:
            if s.name == name:
                return s
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"problem": self.problem, "policies": [s.to_dict() for s in self.stats]}

    def write_totals_csv(self, path: str | Path):
        if self.totals is None:
            raise ValueError("summary was produced without per-episode totals")
        names = list(self.totals)
        episodes = len(next(iter(self.totals.values())))
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["episode", "policy", "total"])
            for i in range(episodes):
                for name in names:
                    writer.writerow([i, name, fmt(float(self.totals[name][i]))])


def allocate(spec: PolicySpec, gains: np.ndarray, budget: float) -> np.ndarray:
    """Allocations for a batch of episodes; ``gains`` has shape (episodes, T), column 0 is slot T."""
    gains = np.atleast_2d(np.asarray(gains, dtype=float))
    N, T = gains.shape
    if spec.kind.noncausal:
        return _proportional(np.full(N, float(budget)), gains, spec.cost)
    alloc = np.empty_like(gains)
    left = np.full(N, float(budget))
    for j in range(T):
        t = T - j
        if t == 1:
            a = left.copy()
        elif spec.kind.causal:
            a = _causal(left, t, gains[:, j], spec)
        elif spec.kind is PolicyKind.EQUAL_BIT:
            a = left / t
        else:
            a = np.zeros(N)
        # keep the remainder nonnegative against rounding
        a = np.minimum(a, left)
        alloc[:, j] = a
        left = left - a
    return alloc


def _outcomes(problem: str, alloc: np.ndarray, gains: np.ndarray, cost: MonomialCost) -> np.ndarray:
    if problem == "primal":
        return slot_energy(alloc, gains, cost)
    return slot_bits(alloc, gains, cost)


def problem_of(spec: PolicySpec) -> str:
    return "dual" if spec.kind in DUAL_KINDS else "primal"


def run_episode(
    spec: PolicySpec, gains: Sequence[float], budget: float, cost: MonomialCost, problem: str | None = None
) -> EpisodeTrace:
    """Run one policy over gains g_T..g_1 with the given bit (or energy) budget."""
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    problem = problem or problem_of(spec)
    gains = np.asarray(gains, dtype=float)
    check_compatible(spec, problem, cost, len(gains))
    alloc = allocate(spec, gains[None, :], budget)[0]
    per_slot = _outcomes(problem, alloc, gains, cost)
    return EpisodeTrace(gains, alloc, per_slot, math.fsum(per_slot))


def gain_matrix(model: FadingModel, master_seed: int, episodes: int, T: int) -> np.ndarray:
    u = np.empty((episodes, T))
    for i in range(episodes):
        u[i] = SeededStream(master_seed, i).uniforms(T)
    return model.quantile(u)


def _stats(name: str, totals: np.ndarray, prediction: float | None) -> PolicyStats:
    n = len(totals)
    mean = math.fsum(totals) / n
    if n > 1:
        var = math.fsum((totals - mean) ** 2) / (n - 1)
        se = math.sqrt(var / n)
    else:
        se = 0.0
    return PolicyStats(name, mean, se, float(totals.min()), float(totals.max()), n, prediction)


def _prediction(spec: PolicySpec, cfg: ExperimentConfig) -> float | None:
    if spec.table is None or spec.table.horizon < cfg.T:
        return None
    if spec.kind is PolicyKind.CAUSAL_PRIMAL:
        return expected_primal_cost(cfg.budget, cfg.cost, spec.table, cfg.T)
    if spec.kind is PolicyKind.CAUSAL_DUAL:
        return expected_dual_bits(cfg.budget, cfg.cost, spec.table, cfg.T)
    return None


def _names(specs: Sequence[PolicySpec]) -> list[str]:
    seen: dict[str, int] = {}
    out = []
    for spec in specs:
        seen[spec.name] = seen.get(spec.name, 0) + 1
        out.append(spec.name if seen[spec.name] == 1 else f"{spec.name}#{seen[spec.name]}")
    return out


def run_experiment(cfg: ExperimentConfig) -> McSummary:
    """Run every policy on the same seeded gain sequences and summarize the totals."""
    gains = gain_matrix(cfg.model, cfg.master_seed, cfg.episodes, cfg.T)
    stats = []
    kept = {} if cfg.keep_totals else None
    for name, spec in zip(_names(cfg.policies), cfg.policies):
        alloc = allocate(spec, gains, cfg.budget)
        totals = _outcomes(cfg.problem, alloc, gains, cfg.cost).sum(axis=1)
        stats.append(_stats(name, totals, _prediction(spec, cfg)))
        if kept is not None:
            kept[name] = totals
    return McSummary(cfg.problem, stats, kept)


def slot_fractions(spec: PolicySpec, gains: np.ndarray, budget: float = 1.0) -> np.ndarray:
    """Mean fraction b_t / beta_t served at each slot (column 0 is slot T) across episodes."""
    alloc = allocate(spec, gains, budget)
    left = budget - np.concatenate([np.zeros((len(alloc), 1)), np.cumsum(alloc, axis=1)[:, :-1]], axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(left > 0, alloc / left, np.nan)
    return np.nanmean(frac, axis=0)


@dataclass(frozen=True)
class Ranking:
    """Policies ordered best first, with pairs too close to call."""

    problem: str
    order: list[PolicyStats]
    indistinguishable: list[tuple[str, str]]

    def to_dict(self) -> dict:
        return {
            "problem": self.problem,
            "order": [s.name for s in self.order],
            "indistinguishable": [list(p) for p in self.indistinguishable],
        }


def compare_report(summary: McSummary, sigmas: float = 2.0) -> Ranking:
    """Rank by mean (lowest energy or highest bits first) and flag every pair whose
    means differ by at most ``sigmas`` combined standard errors.

    A relative slack of 1e-12 absorbs rounding so that policies producing the
    same traces are always flagged.
    """
    order = sorted(summary.stats, key=lambda s: s.mean, reverse=summary.problem == "dual")
    flagged = []
    for i, a in enumerate(order):
        for b in order[i + 1 :]:
            combined = math.hypot(a.std_error, b.std_error)
            slack = 1e-12 * max(abs(a.mean), abs(b.mean))
            if abs(a.mean - b.mean) <= sigmas * combined + slack:
                flagged.append((a.name, b.name))
    return Ranking(summary.problem, order, flagged)
