"""Threshold constants of the optimal causal schedulers.

The primal constants xi[t] are the expected energy needed to deliver one bit
in t slots; the dual constants zeta[t] play the same role for bits delivered
per unit energy. Both come out of backward recursions over the expectation
operator of a fading model.

The recursions are carried in a rescaled state that stays O(t) for any order:

* primal: ``eta_t = xi[t] ** (-1/(n-1))``
* dual:   ``kappa_t = zeta[t] ** (1/(n-1))``

so that xi (which decays like t**-(n-1)) and the (n-1)-th powers inside the
expectation never need to be formed for large n.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .channel import DEFAULT_QUADRATURE, FadingModel, QuadratureConfig
from .errors import ConfigError, IndexOutOfHorizon, InvalidCost, TableMismatch

MAX_HORIZON = 10_000


@dataclass(frozen=True)
class MonomialCost:
    """Energy b**n / g for b bits at gain g; the order n must exceed one."""

    n: float

    def __post_init__(self):
        if not (isinstance(self.n, (int, float)) and math.isfinite(self.n) and self.n > 1):
            raise InvalidCost(f"monomial order must be a finite real > 1, got {self.n!r}")
        object.__setattr__(self, "n", float(self.n))

    @property
    def root(self) -> float:
        """1/(n-1), the exponent applied to gains by every optimal policy."""
        return 1.0 / (self.n - 1.0)

    def gain_root(self, g):
        """g ** (1/(n-1)) via exp/log."""
        return np.exp(np.log(g) / (self.n - 1.0))


class TableKind(str, Enum):
    PRIMAL_XI = "xi"
    DUAL_ZETA = "zeta"


@dataclass(frozen=True)
class ThresholdTable:
    """Constants for t = 1..T plus the rescaled recursion state.

    ``values[t-1]`` is xi or zeta at slot t; ``state[t-1]`` is eta_t (primal)
    or kappa_t (dual). For the primal table ``eta[t-2]`` is the deferral
    weight used by the policy at slot t >= 2, i.e. ``state[t-2]``.
    """

    kind: TableKind
    n: float
    values: tuple[float, ...]
    state: tuple[float, ...]

    @property
    def horizon(self) -> int:
        return len(self.values)

    @property
    def eta(self) -> tuple[float, ...]:
        if self.kind is not TableKind.PRIMAL_XI:
            raise TableMismatch("eta is defined only for primal tables")
        return self.state[:-1]

    def value(self, t: int) -> float:
        self._check(t)
        return self.values[t - 1]

    def scaled_state(self, t: int) -> float:
        self._check(t)
        return self.state[t - 1]

    def _check(self, t: int):
        if not 1 <= t <= self.horizon:
            raise IndexOutOfHorizon(f"slot {t} outside table horizon 1..{self.horizon}")

    def rows(self) -> list[tuple[int, float, float | None]]:
        """(t, value, eta) rows; eta is blank at t = 1 and for dual tables holds kappa_t."""
        out = []
        for t in range(1, self.horizon + 1):
            if self.kind is TableKind.PRIMAL_XI:
                eta = self.state[t - 2] if t >= 2 else None
            else:
                eta = self.state[t - 1]
            out.append((t, self.values[t - 1], eta))
        return out

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "n": self.n,
            "horizon": self.horizon,
            "values": list(self.values),
            "state": list(self.state),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "value", "eta"])
        for t, value, eta in self.rows():
            writer.writerow([t, fmt(value), "" if eta is None else fmt(eta)])
        return buf.getvalue()


def fmt(x: float) -> str:
    return format(x, ".17g")


def _check_horizon(T: int):
    if not isinstance(T, (int, np.integer)) or T < 1:
        raise IndexOutOfHorizon(f"horizon must be a positive integer, got {T!r}")
    if T > MAX_HORIZON:
        raise IndexOutOfHorizon(f"horizon {T} exceeds cap {MAX_HORIZON}")


def xi_table(
    model: FadingModel, cost: MonomialCost, T: int, cfg: QuadratureConfig = DEFAULT_QUADRATURE
) -> ThresholdTable:
    """Primal constants xi[1..T].

    xi[1] = E[1/g] and xi[t] = E[(g**r + eta_{t-1}) ** -(n-1)] with r = 1/(n-1).
    Written in eta, each step is

        eta_t = (eta_{t-1} + gmin**r) * E[exp(-(n-1) * (L(g) - L(gmin)))] ** -r

    with L(g) = log1p(g**r / eta_{t-1}); the integrand is at most one.
    """
    _check_horizon(T)
    n1 = cost.n - 1.0
    inv_moment = model.expect(lambda g: 1.0 / g, cfg)
    eta = inv_moment ** (-cost.root)
    gmin_root = float(cost.gain_root(model.min_gain))
    states = [eta]
    for _ in range(2, T + 1):
        prev = eta
        anchor = math.log1p(gmin_root / prev)

        def integrand(g, prev=prev, anchor=anchor):
            return np.exp(-n1 * (np.log1p(cost.gain_root(g) / prev) - anchor))

        mean = model.expect(integrand, cfg)
        eta = (prev + gmin_root) * mean ** (-cost.root)
        states.append(eta)
    values = tuple(s ** (-n1) for s in states)
    return ThresholdTable(TableKind.PRIMAL_XI, cost.n, values, tuple(states))


def zeta_table(
    model: FadingModel, cost: MonomialCost, T: int, cfg: QuadratureConfig = DEFAULT_QUADRATURE
) -> ThresholdTable:
    """Dual constants zeta[1..T].

    zeta[1] = E[g**(1/n)]**n and zeta[t] = E[(g**r + kappa_{t-1}) ** ((n-1)/n)]**n,
    carried as kappa_t = zeta[t]**r:

        kappa_t = kappa_{t-1} * E[(1 + g**r / kappa_{t-1}) ** ((n-1)/n)] ** (n/(n-1))
    """
    _check_horizon(T)
    n = cost.n
    kappa = model.expect(lambda g: np.exp(np.log(g) / n), cfg) ** (n / (n - 1.0))
    states = [kappa]
    for _ in range(2, T + 1):
        prev = kappa

        def integrand(g, prev=prev):
            return np.exp((n - 1.0) / n * np.log1p(cost.gain_root(g) / prev))

        kappa = prev * model.expect(integrand, cfg) ** (n / (n - 1.0))
        states.append(kappa)
    values = tuple(s ** (n - 1.0) for s in states)
    return ThresholdTable(TableKind.DUAL_ZETA, n, values, tuple(states))


def expected_primal_cost(beta: float, cost: MonomialCost, table: ThresholdTable, t: int) -> float:
    """Optimal expected energy to deliver ``beta`` bits in ``t`` slots: beta**n * xi[t]."""
    _require(table, TableKind.PRIMAL_XI, cost)
    return beta**cost.n * table.value(t)


def expected_dual_bits(energy: float, cost: MonomialCost, table: ThresholdTable, t: int) -> float:
    """Optimal expected bits from ``energy`` spent over ``t`` slots: (zeta[t] * energy)**(1/n)."""
    _require(table, TableKind.DUAL_ZETA, cost)
    return (table.value(t) * energy) ** (1.0 / cost.n)


def limit_gap(table: ThresholdTable, t: int) -> float:
    """Relative distance |xi[t]**(-1/(n-1)) - t| / t of the rescaled constant from t."""
    if table.kind is not TableKind.PRIMAL_XI:
        raise TableMismatch("limit_gap needs a primal table")
    return abs(table.scaled_state(t) - t) / t


def inverse_root(table: ThresholdTable) -> tuple[float, ...]:
    """(1/xi[t])**(1/(n-1)) for t = 1..T, the unshifted eta curve."""
    if table.kind is not TableKind.PRIMAL_XI:
        raise TableMismatch("inverse_root needs a primal table")
    return table.state


def _require(table: ThresholdTable, kind: TableKind, cost: MonomialCost):
    if table.kind is not kind:
        raise TableMismatch(f"expected a {kind.value} table, got {table.kind.value}")
    if table.n != cost.n:
        raise TableMismatch(f"table built for n={table.n}, cost has n={cost.n}")


def table_from_dict(doc: dict) -> ThresholdTable:
    try:
        kind = TableKind(doc["kind"])
        n = float(doc["n"])
        values = tuple(float(v) for v in doc["values"])
        state = doc.get("state")
        if state is None:
            state = _state_from_values(kind, n, values)
        state = tuple(float(s) for s in state)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed threshold table: {exc}") from exc
    if len(state) != len(values) or not values:
        raise ConfigError("threshold table state and values differ in length")
    return ThresholdTable(kind, n, values, state)


def _state_from_values(kind: TableKind, n: float, values) -> tuple[float, ...]:
    r = 1.0 / (n - 1.0)
    if kind is TableKind.PRIMAL_XI:
        return tuple(v ** (-r) for v in values)
    return tuple(v**r for v in values)


def load_table(path: str | Path, kind: TableKind | None = None, n: float | None = None) -> ThresholdTable:
    """Read a table written as JSON, or as CSV with (t, value, eta) columns.

    CSV files carry no metadata, so ``kind`` and ``n`` must be supplied for them.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read table {path}: {exc}") from exc
    if path.suffix.lower() == ".json":
        try:
            return table_from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"table {path} is not valid JSON: {exc}") from exc
    if kind is None or n is None:
        raise ConfigError("CSV tables need an explicit kind and n")
    rows = list(csv.DictReader(io.StringIO(text)))
    try:
        if "n" in (rows[0] if rows else {}):
            rows = [r for r in rows if float(r["n"]) == float(n)]
        rows.sort(key=lambda r: int(r["t"]))
        values = tuple(float(r["value"]) for r in rows)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"malformed table CSV {path}: {exc}") from exc
    if not values:
        raise ConfigError(f"table CSV {path} has no rows for n={n}")
    return ThresholdTable(TableKind(kind), float(n), values, _state_from_values(TableKind(kind), float(n), values))
