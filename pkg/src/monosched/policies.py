"""Bit and energy schedulers.

Per-slot rules accept either scalars or numpy arrays for the state and gain,
so the Monte Carlo engine can step many episodes at once through the same
code that serves single calls.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import ConfigError, EmptyHorizon, NonPositiveGain, TableMismatch
from .thresholds import MonomialCost, TableKind, ThresholdTable, load_table


class PolicyKind(str, Enum):
    CAUSAL_PRIMAL = "causal_primal"
    CAUSAL_DUAL = "causal_dual"
    NONCAUSAL_PRIMAL = "noncausal_primal"
    NONCAUSAL_DUAL = "noncausal_dual"
    EQUAL_BIT = "equal_bit"
    DEADLINE_FLUSH = "deadline_flush"

    @property
    def causal(self) -> bool:
        return self in (PolicyKind.CAUSAL_PRIMAL, PolicyKind.CAUSAL_DUAL)

    @property
    def noncausal(self) -> bool:
        return self in (PolicyKind.NONCAUSAL_PRIMAL, PolicyKind.NONCAUSAL_DUAL)


_TABLE_KIND = {PolicyKind.CAUSAL_PRIMAL: TableKind.PRIMAL_XI, PolicyKind.CAUSAL_DUAL: TableKind.DUAL_ZETA}


@dataclass(frozen=True)
class QueueState:
    beta: float
    t: int

    def __post_init__(self):
        if self.t < 1:
            raise ValueError(f"slots remaining must be >= 1, got {self.t}")


@dataclass(frozen=True)
class EnergyState:
    eps: float
    t: int

    def __post_init__(self):
        if self.t < 1:
            raise ValueError(f"slots remaining must be >= 1, got {self.t}")


@dataclass(frozen=True)
class PolicySpec:
    kind: PolicyKind
    cost: MonomialCost
    table: ThresholdTable | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", PolicyKind(self.kind))
        wanted = _TABLE_KIND.get(self.kind)
        if wanted is None:
            if self.table is not None:
                raise TableMismatch(f"{self.kind.value} takes no threshold table")
            return
        if self.table is None:
            raise TableMismatch(f"{self.kind.value} needs a {wanted.value} table")
        if self.table.kind is not wanted:
            raise TableMismatch(f"{self.kind.value} needs a {wanted.value} table, got {self.table.kind.value}")
        if self.table.n != self.cost.n:
            raise TableMismatch(f"table built for n={self.table.n}, policy has n={self.cost.n}")

    @property
    def name(self) -> str:
        return self.kind.value

    def check_horizon(self, T: int):
        if self.table is not None and self.table.horizon < T - 1:
            raise TableMismatch(f"table horizon {self.table.horizon} too short for T={T}")


def _check_gain(g):
    if np.any(np.asarray(g) <= 0):
        raise NonPositiveGain("channel gains must be positive")


def slot_energy(b, g, cost: MonomialCost):
    """Energy b**n / g to send b bits at gain g."""
    _check_gain(g)
    return np.power(b, cost.n) / g


def slot_bits(e, g, cost: MonomialCost):
    """Bits (g*e)**(1/n) sent by spending energy e at gain g."""
    _check_gain(g)
    return np.power(g * e, 1.0 / cost.n)


def _split(total, g, weight, cost: MonomialCost):
    # total * g^r / (g^r + weight); the t = 1 flush is handled by the callers
    w = cost.gain_root(g)
    return total * (w / (w + weight))


def causal_primal_bits(state: QueueState, g, spec: PolicySpec):
    """Bits to send now with `state.beta` left and `state.t` slots to go."""
    if spec.kind is not PolicyKind.CAUSAL_PRIMAL:
        raise TableMismatch(f"causal_primal_bits called with a {spec.kind.value} spec")
    return _causal(state.beta, state.t, g, spec)


def causal_dual_energy(state: EnergyState, g, spec: PolicySpec):
    if spec.kind is not PolicyKind.CAUSAL_DUAL:
        raise TableMismatch(f"causal_dual_energy called with a {spec.kind.value} spec")
    return _causal(state.eps, state.t, g, spec)


def _causal(total, t: int, g, spec: PolicySpec):
    _check_gain(g)
    if t == 1:
        return total
    if t - 1 > spec.table.horizon:
        raise TableMismatch(f"slot {t} needs table entry {t - 1}, horizon is {spec.table.horizon}")
    # table state at t-1 is eta_t (primal) or zeta[t-1]**(1/(n-1)) (dual)
    return _split(total, g, spec.table.scaled_state(t - 1), spec.cost)


def equal_bit(state: QueueState):
    """Serve an equal share of what is left: beta / t."""
    return state.beta / state.t


def deadline_flush(state: QueueState):
    """Send nothing before the last slot, everything in it."""
    return state.beta if state.t == 1 else 0.0 * state.beta


def noncausal_primal_bits(state: QueueState, gains_left: Sequence[float], cost: MonomialCost):
    """Per-slot form of the full-knowledge rule; ``gains_left`` is g_t, g_{t-1}, ..., g_1."""
    w = cost.gain_root(np.asarray(gains_left, dtype=float))
    return state.beta * w[0] / w.sum()


def _proportional(budget, gains, cost: MonomialCost) -> np.ndarray:
    # works row-wise on a 2-D array of gain sequences as well as on one sequence
    gains = np.asarray(gains, dtype=float)
    if gains.shape[-1] == 0:
        raise EmptyHorizon("cannot allocate over zero slots")
    _check_gain(gains)
    w = cost.gain_root(gains)
    budget = np.asarray(budget, dtype=float)[..., None]
    alloc = budget * (w / w.sum(axis=-1, keepdims=True))
    # pin the sum to the budget by absorbing the rounding residue in the largest share
    k = np.argmax(alloc, axis=-1)[..., None]
    largest = np.take_along_axis(alloc, k, axis=-1)
    rest = alloc.sum(axis=-1, keepdims=True) - largest
    np.put_along_axis(alloc, k, np.maximum(budget - rest, 0.0), axis=-1)
    return alloc


def noncausal_primal(B: float, gains: Sequence[float], cost: MonomialCost) -> np.ndarray:
    """Bits per slot when all gains g_T..g_1 are known up front: B * g**r / sum(g**r)."""
    return _proportional(B, gains, cost)


def noncausal_dual(E: float, gains: Sequence[float], cost: MonomialCost) -> np.ndarray:
    """Energy per slot under full channel knowledge; same proportions as the bit split."""
    return _proportional(E, gains, cost)


PRIMAL_KINDS = frozenset({PolicyKind.CAUSAL_PRIMAL, PolicyKind.NONCAUSAL_PRIMAL})
DUAL_KINDS = frozenset({PolicyKind.CAUSAL_DUAL, PolicyKind.NONCAUSAL_DUAL})


def policy_from_dict(doc: dict, cost: MonomialCost | None = None, build_table=None) -> PolicySpec:
    """Build a spec from ``{"kind": ..., "n": ..., "table": path}``.

    ``cost`` applies when the document omits ``n``. A causal policy without a
    table path gets ``build_table(table_kind, cost)`` if that callback is given.
    """
    try:
        kind = PolicyKind(doc["kind"])
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad policy kind in {doc!r}") from exc
    if doc.get("n") is not None:
        cost = MonomialCost(float(doc["n"]))
    if cost is None:
        raise ConfigError(f"policy {kind.value} has no order n")
    table = None
    if kind.causal:
        if doc.get("table") is not None:
            table = load_table(doc["table"], _TABLE_KIND[kind], cost.n)
        elif build_table is not None:
            table = build_table(_TABLE_KIND[kind], cost)
    return PolicySpec(kind, cost, table)
