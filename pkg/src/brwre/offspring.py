"""Progeny distribution families and probability generating function arithmetic.

Every family exposes the same small surface: ``mean``, ``pmf``, ``pgf``,
vectorised child-count sampling, and a closed-form draw for the total progeny
of a whole generation.  Quenched quantities of the generation size Z_i under a
reversed environment segment come from composing the per-generation pgfs:
scalar composition yields extinction probabilities, truncated power-series
composition yields the pmf up to a degree cap with unassigned tail mass kept
in an explicit bucket.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.signal import fftconvolve

# Per-law coefficient truncation for infinite-support families.
_COEFF_TOL = 1e-16
# Below this total mass, deeper convolution powers live entirely past the cap.
_POWER_FLOOR = 1e-18
# Direct convolution up to this cost, FFT beyond.
_DIRECT_CONV_COST = 1 << 18


def _check_prob(s: float) -> float:
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"pgf argument must lie in [0, 1], got {s}")
    return float(s)


@dataclass(frozen=True)
class Deterministic:
    """Point mass: every particle has exactly ``k`` children."""

    k: int

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError("deterministic progeny requires an integer k >= 1")

    def mean(self) -> float:
        return float(self.k)

    def pmf(self, j: int) -> float:
        return 1.0 if j == self.k else 0.0

    def pgf(self, s: float) -> float:
        return _check_prob(s) ** self.k

    @property
    def support_max(self):
        return self.k

    def sample_many(self, rng, size: int) -> np.ndarray:
        return np.full(size, self.k, dtype=np.int64)

    def sample_total(self, rng, count: int) -> int:
        return self.k * count

    def coefficients(self, cap: int):
        if self.k > cap:
            return np.zeros(1), 1.0
        vec = np.zeros(self.k + 1)
        vec[self.k] = 1.0
        return vec, 0.0


@dataclass(frozen=True)
class Poisson:
    """Poisson(lam) progeny."""

    lam: float

    def __post_init__(self):
        if not self.lam > 0.0:
            raise ValueError("poisson progeny requires lam > 0")

    def mean(self) -> float:
        return self.lam

    def pmf(self, j: int) -> float:
        if j < 0:
            return 0.0
        return math.exp(j * math.log(self.lam) - self.lam - math.lgamma(j + 1))

    def pgf(self, s: float) -> float:
        return math.exp(self.lam * (_check_prob(s) - 1.0))

    @property
    def support_max(self):
        return None

    def sample_many(self, rng, size: int) -> np.ndarray:
        return rng.poisson(self.lam, size).astype(np.int64, copy=False)

    def sample_total(self, rng, count: int) -> int:
        return int(rng.poisson(self.lam * count))

    def coefficients(self, cap: int):
        probs = [math.exp(-self.lam)]
        cum = probs[0]
        k = 0
        while cum < 1.0 - _COEFF_TOL and k < cap:
            k += 1
            probs.append(probs[-1] * self.lam / k)
            cum += probs[-1]
        return np.array(probs), max(0.0, 1.0 - cum)


@dataclass(frozen=True)
class Geometric:
    """Geometric progeny on {0, 1, 2, ...}: P(xi = k) = (1 - q) q^k."""

    q: float

    def __post_init__(self):
        if not 0.0 < self.q < 1.0:
            raise ValueError("geometric progeny requires 0 < q < 1")

    def mean(self) -> float:
        return self.q / (1.0 - self.q)

    def pmf(self, j: int) -> float:
        if j < 0:
            return 0.0
        return (1.0 - self.q) * self.q ** j

    def pgf(self, s: float) -> float:
        return (1.0 - self.q) / (1.0 - self.q * _check_prob(s))

    @property
    def support_max(self):
        return None

    def sample_many(self, rng, size: int) -> np.ndarray:
        # numpy's geometric counts trials to first success; shift to failures.
        return rng.geometric(1.0 - self.q, size).astype(np.int64, copy=False) - 1

    def sample_total(self, rng, count: int) -> int:
        # Sum of `count` geometrics = negative binomial (failures before
        # the count-th success at success probability 1 - q).
        return int(rng.negative_binomial(count, 1.0 - self.q))

    def coefficients(self, cap: int):
        kmax = min(cap, int(math.ceil(math.log(_COEFF_TOL) / math.log(self.q))))
        ks = np.arange(kmax + 1)
        probs = (1.0 - self.q) * self.q ** ks
        return probs, self.q ** (kmax + 1)


@dataclass(frozen=True)
class Binomial:
    """Binomial(m, q) progeny."""

    m: int
    q: float

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError("binomial progeny requires an integer m >= 1")
        if not 0.0 < self.q < 1.0:
            raise ValueError("binomial progeny requires 0 < q < 1")

    def mean(self) -> float:
        return self.m * self.q

    def pmf(self, j: int) -> float:
        if j < 0 or j > self.m:
            return 0.0
        logc = math.lgamma(self.m + 1) - math.lgamma(j + 1) - math.lgamma(self.m - j + 1)
        return math.exp(logc + j * math.log(self.q) + (self.m - j) * math.log(1.0 - self.q))

    def pgf(self, s: float) -> float:
        return (1.0 - self.q + self.q * _check_prob(s)) ** self.m

    @property
    def support_max(self):
        return self.m

    def sample_many(self, rng, size: int) -> np.ndarray:
        return rng.binomial(self.m, self.q, size).astype(np.int64, copy=False)

    def sample_total(self, rng, count: int) -> int:
        return int(rng.binomial(self.m * count, self.q))

    def coefficients(self, cap: int):
        if self.m > cap:
            probs = np.array([self.pmf(j) for j in range(cap + 1)])
            return probs, max(0.0, 1.0 - probs.sum())
        return np.array([self.pmf(j) for j in range(self.m + 1)]), 0.0


@dataclass(frozen=True)
class Finite:
    """Arbitrary progeny pmf on {0, ..., K}."""

    probs: tuple

    def __post_init__(self):
        vec = np.asarray(self.probs, dtype=float)
        if vec.ndim != 1 or vec.size < 2:
            raise ValueError("finite progeny needs a pmf vector over 0..K, K >= 1")
        if np.any(vec < 0.0) or abs(vec.sum() - 1.0) > 1e-12:
            raise ValueError("finite progeny pmf must be nonnegative and sum to 1")
        if not float(np.arange(vec.size) @ vec) > 0.0:
            raise ValueError("finite progeny pmf must have positive mean")
        object.__setattr__(self, "probs", tuple(float(p) for p in vec))

    def _vec(self) -> np.ndarray:
        return np.asarray(self.probs)

    def mean(self) -> float:
        vec = self._vec()
        return float(np.arange(vec.size) @ vec)

    def pmf(self, j: int) -> float:
        if 0 <= j < len(self.probs):
            return self.probs[j]
        return 0.0

    def pgf(self, s: float) -> float:
        s = _check_prob(s)
        return float(np.polynomial.polynomial.polyval(s, self._vec()))

    @property
    def support_max(self):
        return len(self.probs) - 1

    def sample_many(self, rng, size: int) -> np.ndarray:
        cum = np.cumsum(self._vec())
        return np.searchsorted(cum, rng.random(size), side="right").astype(np.int64)

    def sample_total(self, rng, count: int) -> int:
        hits = rng.multinomial(count, self._vec())
        return int(np.arange(hits.size) @ hits)

    def coefficients(self, cap: int):
        vec = self._vec()
        if vec.size - 1 > cap:
            return vec[: cap + 1].copy(), float(vec[cap + 1 :].sum())
        return vec.copy(), 0.0


OffspringLaw = Union[Deterministic, Poisson, Geometric, Binomial, Finite]


def sample(law: OffspringLaw, rng) -> int:
    """One progeny draw from ``law``."""
    return int(law.sample_many(rng, 1)[0])


def mean(law: OffspringLaw) -> float:
    return law.mean()


def pmf(law: OffspringLaw, k: int) -> float:
    return law.pmf(k)


def pgf_eval(law: OffspringLaw, s: float) -> float:
    return law.pgf(s)


@dataclass
class TruncatedPMF:
    """A pmf on {0..D} plus the mass that fell past the degree cap.

    ``probs[r]`` is exact mass at r whenever the composition never spilled;
    otherwise entries are conservative (under-) estimates and the deficit sits
    in ``mass_beyond``.
    """

    probs: np.ndarray
    mass_beyond: float

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        if np.any(self.probs < -1e-12):
            raise ValueError("pmf entries must be nonnegative")
        self.probs = np.clip(self.probs, 0.0, None)
        total = self.probs.sum() + self.mass_beyond
        if not (1.0 - 1e-9 <= total <= 1.0 + 1e-9):
            raise ValueError(f"pmf mass {total} not within 1e-9 of 1")

    @property
    def degree(self) -> int:
        return self.probs.size - 1

    def mean_lower_bound(self) -> float:
        return float(np.arange(self.probs.size) @ self.probs)


def _trunc_conv(x: np.ndarray, y: np.ndarray, cap: int) -> np.ndarray:
    if x.size * y.size <= _DIRECT_CONV_COST:
        out = np.convolve(x, y)
    else:
        out = fftconvolve(x, y)
        np.clip(out, 0.0, None, out=out)
    return out[: cap + 1]


def compose_generation(law: OffspringLaw, base: TruncatedPMF, degree_cap: int) -> TruncatedPMF:
    """PMF of a sum of ``law``-many i.i.d. copies of ``base``.

    This is the one-step outer composition f_law(G(s)) on truncated
    polynomials: prepending a fresh root generation to an existing quenched
    generation-size law.
    """
    coeffs, _ = law.coefficients(degree_cap)
    c = base.probs
    out = np.zeros(degree_cap + 1)
    out[0] = coeffs[0]
    power = np.ones(1)
    for k in range(1, coeffs.size):
        power = _trunc_conv(power, c, degree_cap)
        if coeffs[k] > 0.0:
            out[: power.size] += coeffs[k] * power
        if power.sum() < _POWER_FLOOR:
            break
    last = int(np.flatnonzero(out)[-1]) if np.any(out) else 0
    out = out[: last + 1]
    return TruncatedPMF(out, max(0.0, 1.0 - out.sum()))


def extinct_prob_by_gen(env_rev: Sequence[OffspringLaw]) -> float:
    """P(Z_i = 0) for a reversed environment segment of length i.

    ``env_rev[0]`` governs generation 0, so the pgfs compose outside-in:
    f_{env_rev[0]}(f_{env_rev[1]}(... f_{env_rev[i-1]}(0))).  An empty segment
    means Z_0 = 1, extinction probability 0.
    """
    e = 0.0
    for law in reversed(list(env_rev)):
        e = law.pgf(e)
    return e


def generation_size_pmf(env_rev: Sequence[OffspringLaw], degree_cap: int) -> TruncatedPMF:
    """Exact truncated pmf of Z_i under a reversed environment segment.

    Iterated truncated power-series composition of the per-generation pgfs;
    exact (``mass_beyond`` = 0) whenever the support never outgrows the cap.
    """
    if degree_cap < 1:
        raise ValueError("degree_cap must be >= 1")
    base = TruncatedPMF(np.array([0.0, 1.0]), 0.0)
    for law in reversed(list(env_rev)):
        base = compose_generation(law, base, degree_cap)
    return base
