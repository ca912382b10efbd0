"""Fading-gain distributions, expectations over them, and seeded sampling.

Every model is an immutable dataclass. Construction checks the parameters and
normalizes the probability mass; :func:`validate` additionally confirms that
E[1/g] is finite, which the primal threshold recursion needs.

Functionals passed to :func:`expect` must accept a numpy array of gains and
return an array of the same shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import DivergentInverseMoment, ModelError, NonPositiveSupport, QuadratureNotConverged

Functional = Callable[[np.ndarray], np.ndarray]

_GL_ORDER = 10
_INITIAL_PANELS = 8


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    max_subdivisions: int = 2**16

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("quadrature tolerances must be strictly positive")
        if self.max_subdivisions < 16:
            raise ValueError("max_subdivisions must be at least 16")


DEFAULT_QUADRATURE = QuadratureConfig()


@dataclass(frozen=True)
class SeededStream:
    """A reproducible uniform stream identified by (master_seed, stream_index).

    Streams are derived through numpy's ``SeedSequence`` feeding PCG64, both of
    which are specified bit-exactly across platforms.
    """

    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if self.stream_index < 0:
            raise ValueError("stream_index must be nonnegative")

    def uniforms(self, count: int) -> np.ndarray:
        rng = np.random.default_rng([self.master_seed, self.stream_index])
        return rng.random(count)


class FadingModel:
    """Common interface of the channel-gain distributions."""

    kind: str = ""

    @property
    def min_gain(self) -> float:
        """Smallest gain in the support."""
        raise NotImplementedError

    def expect(self, f: Functional, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
        raise NotImplementedError

    def quantile(self, q: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sample(self, stream: SeededStream, count: int) -> np.ndarray:
        return self.quantile(stream.uniforms(count))

    def to_dict(self) -> dict:
        raise NotImplementedError

    def scaled(self, a: float) -> "FadingModel":
        """The distribution of a*g."""
        raise NotImplementedError


@dataclass(frozen=True)
class Deterministic(FadingModel):
    c: float
    kind = "deterministic"

    def __post_init__(self):
        if not (math.isfinite(self.c) and self.c > 0):
            raise NonPositiveSupport(f"deterministic gain must be positive, got {self.c}")

    @property
    def min_gain(self) -> float:
        return self.c

    def expect(self, f, cfg=DEFAULT_QUADRATURE):
        return float(np.asarray(f(np.array([self.c], dtype=float)))[0])

    def quantile(self, q):
        return np.full(np.shape(q), self.c, dtype=float)

    def to_dict(self):
        return {"kind": self.kind, "c": self.c}

    def scaled(self, a):
        return Deterministic(a * self.c)


@dataclass(frozen=True)
class Discrete(FadingModel):
    """Finitely many gains with probabilities; probabilities are renormalized to sum to one."""

    atoms: tuple[tuple[float, float], ...]
    kind = "discrete"

    def __post_init__(self):
        atoms = tuple((float(g), float(p)) for g, p in self.atoms)
        if not atoms:
            raise ModelError("discrete model needs at least one atom")
        for g, p in atoms:
            if not math.isfinite(g) or g <= 0:
                raise NonPositiveSupport(f"atom gain must be positive, got {g}")
            if not math.isfinite(p) or p < 0:
                raise ModelError(f"atom probability must be nonnegative, got {p}")
        total = math.fsum(p for _, p in atoms)
        if total <= 0:
            raise ModelError("discrete model has zero total probability")
        object.__setattr__(self, "atoms", tuple((g, p / total) for g, p in atoms))

    @property
    def gains(self) -> np.ndarray:
        return np.array([g for g, _ in self.atoms])

    @property
    def probs(self) -> np.ndarray:
        return np.array([p for _, p in self.atoms])

    @property
    def min_gain(self):
        return min(g for g, p in self.atoms if p > 0)

    def expect(self, f, cfg=DEFAULT_QUADRATURE):
        values = np.asarray(f(self.gains), dtype=float)
        return math.fsum(p * v for (_, p), v in zip(self.atoms, values) if p > 0)

    def quantile(self, q):
        cum = np.cumsum(self.probs)
        idx = np.searchsorted(cum, q, side="right")
        return self.gains[np.minimum(idx, len(self.atoms) - 1)]

    def to_dict(self):
        return {"kind": self.kind, "atoms": [list(a) for a in self.atoms]}

    def scaled(self, a):
        return Discrete(tuple((a * g, p) for g, p in self.atoms))


@dataclass(frozen=True)
class TruncatedExponential(FadingModel):
    """Density rate*exp(-rate*(g - threshold)) for g >= threshold."""

    threshold: float
    rate: float = 1.0
    kind = "truncated_exponential"

    def __post_init__(self):
        if not (math.isfinite(self.rate) and self.rate > 0):
            raise ModelError(f"rate must be positive, got {self.rate}")
        if not math.isfinite(self.threshold) or self.threshold < 0:
            raise NonPositiveSupport(f"threshold must be positive, got {self.threshold}")
        if self.threshold == 0:
            # the integral of exp(-g)/g over (0, inf) diverges
            raise DivergentInverseMoment("E[1/g] diverges for an untruncated exponential")

    @property
    def min_gain(self):
        return self.threshold

    def gain_at(self, u: np.ndarray) -> np.ndarray:
        """Map the tail variable u = exp(-rate*(g - threshold)) in (0, 1] back to g."""
        return self.threshold - np.log(u) / self.rate

    def expect(self, f, cfg=DEFAULT_QUADRATURE):
        # f(g) * pdf(g) dg == f(g(u)) du on (0, 1]
        return adaptive_gauss_legendre(lambda u: f(self.gain_at(u)), 0.0, 1.0, cfg)

    def quantile(self, q):
        return self.threshold - np.log1p(-np.asarray(q, dtype=float)) / self.rate

    def to_dict(self):
        return {"kind": self.kind, "threshold": self.threshold, "rate": self.rate}

    def scaled(self, a):
        return TruncatedExponential(a * self.threshold, self.rate / a)


@dataclass(frozen=True)
class TabulatedPdf(FadingModel):
    """A density given on a grid, linear between grid points and zero outside it."""

    grid: tuple[tuple[float, float], ...]
    _gains: np.ndarray = field(init=False, repr=False, compare=False)
    _density: np.ndarray = field(init=False, repr=False, compare=False)
    _cdf: np.ndarray = field(init=False, repr=False, compare=False)
    kind = "tabulated_pdf"

    def __post_init__(self):
        pts = tuple((float(g), float(d)) for g, d in self.grid)
        if len(pts) < 2:
            raise ModelError("tabulated pdf needs at least two grid points")
        gains = np.array([g for g, _ in pts])
        dens = np.array([d for _, d in pts])
        if not np.all(np.isfinite(gains)) or np.any(gains <= 0):
            raise NonPositiveSupport("tabulated grid gains must be positive")
        if np.any(np.diff(gains) <= 0):
            raise ModelError("tabulated grid must be strictly increasing")
        if not np.all(np.isfinite(dens)) or np.any(dens < 0):
            raise ModelError("tabulated densities must be nonnegative")
        mass = np.trapezoid(dens, gains)
        if mass <= 0:
            raise ModelError("tabulated density has zero mass")
        dens = dens / mass
        cell = 0.5 * (dens[1:] + dens[:-1]) * np.diff(gains)
        cdf = np.concatenate([[0.0], np.cumsum(cell)])
        cdf /= cdf[-1]
        object.__setattr__(self, "grid", tuple(zip(gains.tolist(), dens.tolist())))
        object.__setattr__(self, "_gains", gains)
        object.__setattr__(self, "_density", dens)
        object.__setattr__(self, "_cdf", cdf)

    @property
    def min_gain(self):
        nz = np.nonzero((self._density[:-1] > 0) | (self._density[1:] > 0))[0]
        return float(self._gains[nz[0]])

    def expect(self, f, cfg=DEFAULT_QUADRATURE):
        return float(np.trapezoid(np.asarray(f(self._gains)) * self._density, self._gains))

    def quantile(self, q):
        q = np.asarray(q, dtype=float)
        g, d, cdf = self._gains, self._density, self._cdf
        i = np.clip(np.searchsorted(cdf, q, side="right") - 1, 0, len(g) - 2)
        width = g[i + 1] - g[i]
        slope = (d[i + 1] - d[i]) / width
        target = q - cdf[i]
        # solve d_i*x + slope*x^2/2 = target in the cell, in the cancellation-free form
        disc = np.sqrt(np.maximum(d[i] ** 2 + 2.0 * slope * target, 0.0))
        denom = d[i] + disc
        with np.errstate(divide="ignore", invalid="ignore"):
            x = np.where(denom > 0, 2.0 * target / denom, 0.0)
        return g[i] + np.clip(x, 0.0, width)

    def to_dict(self):
        return {"kind": self.kind, "grid": [list(p) for p in self.grid]}

    def scaled(self, a):
        return TabulatedPdf(tuple((a * g, d) for g, d in self.grid))


@lru_cache(maxsize=None)
def _legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(order)


def _panel_sums(f: Functional, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    x, w = _legendre(_GL_ORDER)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    nodes = mid[:, None] + half[:, None] * x[None, :]
    values = np.asarray(f(nodes.ravel()), dtype=float).reshape(nodes.shape)
    if not np.all(np.isfinite(values)):
        raise ValueError("integrand is not finite on the integration domain")
    return half * (values @ w)


def adaptive_gauss_legendre(
    f: Functional, a: float, b: float, cfg: QuadratureConfig = DEFAULT_QUADRATURE
) -> float:
    """Integrate f over [a, b] with globally adaptive composite Gauss-Legendre.

    Each panel is compared against the sum over its two halves; panels whose
    disagreement is above their share of the tolerance get bisected. The
    returned value is the sum of the half-panel estimates.
    """
    edges = np.linspace(a, b, _INITIAL_PANELS + 1)
    lo, hi = edges[:-1], edges[1:]
    coarse = _panel_sums(f, lo, hi)
    mid = 0.5 * (lo + hi)
    left = _panel_sums(f, lo, mid)
    right = _panel_sums(f, mid, hi)
    splits = 0
    while True:
        fine = left + right
        err = np.abs(fine - coarse)
        err = np.where(err <= 64 * np.finfo(float).eps * np.abs(fine), 0.0, err)
        total = math.fsum(fine)
        bound = math.fsum(err)
        tol = max(cfg.abs_tol, cfg.rel_tol * abs(total))
        if bound <= tol:
            return total
        refine = err > tol / (2 * len(err))
        splits += int(refine.sum())
        if splits > cfg.max_subdivisions:
            raise QuadratureNotConverged(total, bound, splits)
        keep = ~refine
        # children of a refined panel inherit its half sums as their coarse estimates
        new_lo = np.concatenate([lo[refine], mid[refine]])
        new_hi = np.concatenate([mid[refine], hi[refine]])
        new_coarse = np.concatenate([left[refine], right[refine]])
        new_mid = 0.5 * (new_lo + new_hi)
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        coarse = np.concatenate([coarse[keep], new_coarse])
        left = np.concatenate([left[keep], _panel_sums(f, new_lo, new_mid)])
        right = np.concatenate([right[keep], _panel_sums(f, new_mid, new_hi)])
        mid = np.concatenate([mid[keep], new_mid])


def expect(model: FadingModel, f: Functional, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """E[f(g)] under ``model``."""
    return model.expect(f, cfg)


def sample(model: FadingModel, stream: SeededStream, count: int) -> np.ndarray:
    """``count`` i.i.d. gains by inverse-CDF from ``stream``."""
    return model.sample(stream, count)


def validate(model: FadingModel, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> FadingModel:
    """Return ``model`` after confirming E[1/g] evaluates finite.

    Parameter checks already run at construction; this adds the numerical
    inverse-moment check for continuous kinds. A quadrature that runs out of
    subdivisions raises QuadratureNotConverged unchanged.
    """
    if not isinstance(model, FadingModel):
        raise ModelError(f"not a fading model: {model!r}")
    inv = model.expect(lambda g: 1.0 / g, cfg)
    if not math.isfinite(inv):
        raise DivergentInverseMoment("E[1/g] is not finite")
    return model


def quantize(model: FadingModel, atoms: int) -> tuple[np.ndarray, np.ndarray]:
    """Equal-probability quantile-midpoint atoms for a continuous model.

    Discrete and deterministic models are returned exactly.
    """
    if isinstance(model, Deterministic):
        return np.array([model.c]), np.array([1.0])
    if isinstance(model, Discrete):
        return model.gains, model.probs
    q = (np.arange(atoms) + 0.5) / atoms
    return model.quantile(q), np.full(atoms, 1.0 / atoms)


def model_from_dict(doc: dict) -> FadingModel:
    """Build a model from its JSON form, e.g. ``{"kind": "truncated_exponential", "threshold": 0.001, "rate": 1.0}``."""
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ModelError("model document must be an object with a 'kind' field")
    kind = doc["kind"]
    try:
        if kind == "deterministic":
            return Deterministic(float(doc["c"]))
        if kind == "discrete":
            return Discrete(tuple((float(g), float(p)) for g, p in doc["atoms"]))
        if kind == "truncated_exponential":
            return TruncatedExponential(float(doc["threshold"]), float(doc.get("rate", 1.0)))
        if kind == "tabulated_pdf":
            return TabulatedPdf(tuple((float(g), float(d)) for g, d in doc["grid"]))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(f"malformed {kind} model: {exc}") from exc
    raise ModelError(f"unknown model kind {kind!r}")


def canonical_model() -> TruncatedExponential:
    """Unit-rate exponential gain truncated at 0.001, the canonical test distribution."""
    return TruncatedExponential(0.001, 1.0)

