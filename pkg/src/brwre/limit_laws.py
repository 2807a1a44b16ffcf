"""Samplers and evaluators for the limit objects of the extremal picture.

Everything quenched lives on an :class:`EnvStream`: a lazily realized i.i.d.
environment with cached mean products, extinction probabilities and truncated
generation-size pmfs, all indexed so that entry i describes the population
grown for i generations with the newest drawn law at the root.

The normalizing series are summed with a certified geometric tail bound; the
cluster samplers draw a generation index from the series terms and then the
size (or brood vector) from the cached truncated pmfs, falling back to direct
population simulation for the rare mass past the degree cap.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .displacement import DisplacementModel, Pattern, pattern_mass
from .environment import EnvironmentModel
from .errors import (
    ArgumentOrder,
    NonGeometricGrowth,
    RejectionCapExceeded,
    UnboundedProgenyInGeneralMode,
)
from .measures import PointMeasure
from .offspring import TruncatedPMF, compose_generation

# Window of realized per-step mean ratios used when the model's worst-case
# mean does not certify geometric growth on its own.
_GROWTH_WINDOW = 8
# Stop count-level population simulation once the martingale value is frozen
# to ~1e-6 relative accuracy; the conditional mean is preserved exactly.
_FREEZE_POPULATION = 1_000_000_000_000
_REJECTION_CAP = 1_000_000
# Pattern enumeration is 2^v; refuse silly brood sizes.
_MAX_PATTERN_BROOD = 20


@dataclass(frozen=True)
class LimitConfig:
    series_tol: float = 1e-9
    max_terms: int = 400
    w_horizon: int = 30
    degree_cap: int = 4096
    u_min: float = 0.05
    n_limit_samples: int = 10000

    def __post_init__(self):
        if not 0.0 < self.series_tol < 1.0:
            raise ValueError("series_tol must lie in (0, 1)")
        if self.w_horizon < 1 or self.max_terms < 1 or self.degree_cap < 1:
            raise ValueError("w_horizon, max_terms and degree_cap must be >= 1")
        if not self.u_min > 0.0:
            raise ValueError("u_min must be positive")


@dataclass
class SeriesValue:
    value: float
    tail_bound: float
    terms_used: int


@dataclass
class QSample:
    """One draw of the mixing scale of the limit maximum law.

    ``q`` multiplies x^(-alpha) in the limit CDF exponent; ``w`` is the
    martingale-limit draw and ``c_value`` the realized normalizing series, so
    w * c_value recovers the environment part needed by the joint laws.
    """

    q: float
    w: float
    env_prime_summary: tuple
    c_value: float


class EnvStream:
    """A lazily drawn independent environment with cached quenched data."""

    def __init__(self, model: EnvironmentModel, rng, degree_cap: int):
        self.model = model
        self.degree_cap = degree_cap
        self._rng = rng
        self._indices: List[int] = []
        self._laws: List = []
        self._pi: List[float] = [1.0]
        self._extinct: List[float] = [0.0]
        self._pmfs: List[TruncatedPMF] = [TruncatedPMF(np.array([0.0, 1.0]), 0.0)]

    def _extend(self, i: int) -> None:
        while len(self._laws) <= i:
            idx = int(self.model.draw_indices(self._rng, 1)[0])
            law = self.model.support[idx]
            self._indices.append(idx)
            self._laws.append(law)
            self._pi.append(self._pi[-1] * law.mean())
            self._extinct.append(law.pgf(self._extinct[-1]))

    def law(self, i: int):
        self._extend(i)
        return self._laws[i]

    def pi(self, i: int) -> float:
        """Expected size after i generations (product of the first i means)."""
        if i > 0:
            self._extend(i - 1)
        return self._pi[i]

    def extinct_prob(self, i: int) -> float:
        """P(Z_i = 0) for the i-generation population, newest law at the root."""
        if i > 0:
            self._extend(i - 1)
        return self._extinct[i]

    def gen_size_pmf(self, i: int) -> TruncatedPMF:
        """Truncated pmf of Z_i; cached, extended by outer composition."""
        while len(self._pmfs) <= i:
            j = len(self._pmfs)
            self._pmfs.append(compose_generation(self.law(j - 1), self._pmfs[-1], self.degree_cap))
        return self._pmfs[i]

    def simulate_population(self, i: int, rng) -> int:
        """Count-level draw of Z_i under this environment (no truncation)."""
        z = 1
        for g in range(i):
            # generation g uses the (i-1-g)-th stream law: newest at the root
            z = self.law(i - 1 - g).sample_total(rng, z)
            # any such draw is far past every degree cap already; stop before
            # closed-form samplers overflow
            if z == 0 or z > 10 ** 14:
                break
        return z

    @property
    def indices_used(self) -> tuple:
        return tuple(self._indices)


SERIES_KINDS = (
    "inverse_mean",  # sum of 1/pi_i
    "cluster_size",  # sum of P(Z_i >= 1)/pi_i
    "cluster_vector",  # normalizer of the nonzero brood-vector law
    "cluster_vector_leafless",  # same without the extinct-vector exclusion
)


def _series_terms(kind: str, stream: EnvStream, cfg: LimitConfig) -> Tuple[SeriesValue, np.ndarray]:
    """Sum the quenched series with a certified geometric tail bound."""
    shifted = kind in ("cluster_vector", "cluster_vector_leafless", "_inverse_mean_next")
    g_model = stream.model.min_support_mean()
    terms: List[float] = []
    value = 0.0
    recent: List[float] = []
    for i in range(cfg.max_terms):
        if kind == "inverse_mean":
            term = 1.0 / stream.pi(i)
        elif kind == "cluster_size":
            term = (1.0 - stream.extinct_prob(i)) / stream.pi(i)
        elif kind == "cluster_vector":
            # sum_v P(Z_1 = v)(1 - e_i^v) collapses to 1 - f_i(e_i) = 1 - e_{i+1}
            term = (1.0 - stream.law(i).pgf(stream.extinct_prob(i))) / stream.pi(i + 1)
        elif kind == "cluster_vector_leafless":
            term = (1.0 - stream.law(i).pmf(0)) / stream.pi(i + 1)
        elif kind == "_inverse_mean_next":
            term = 1.0 / stream.pi(i + 1)
        else:
            raise ValueError(f"unknown series kind {kind!r}")
        terms.append(term)
        value += term
        recent.append(stream.law(i).mean())
        if len(recent) > _GROWTH_WINDOW:
            recent.pop(0)
        growth = g_model if g_model > 1.0 else min(recent)
        if growth > 1.0 and value > 0.0:
            denom = stream.pi(i + 1) if shifted else stream.pi(i)
            tail = (1.0 / denom) / (growth - 1.0)
            if tail < cfg.series_tol * value:
                return SeriesValue(value, tail, i + 1), np.asarray(terms)
    raise NonGeometricGrowth(
        f"series {kind!r} did not certify its tail within {cfg.max_terms} terms"
    )


def cluster_norm_series(kind: str, stream: EnvStream, cfg: LimitConfig) -> SeriesValue:
    """Quenched normalizing series for a realized environment.

    Kinds: ``inverse_mean`` (reciprocal expected generation sizes),
    ``cluster_size`` (survival-weighted reciprocals, the cluster-size law
    normalizer), ``cluster_vector`` (brood-vector law excluding the all-dead
    vector) and ``cluster_vector_leafless`` (no exclusion).
    """
    if kind not in SERIES_KINDS:
        raise ValueError(f"unknown series kind {kind!r}")
    sv, _ = _series_terms(kind, stream, cfg)
    return sv


def sample_martingale_limit(
    model: EnvironmentModel, m: int, condition_on_survival: bool, rng
) -> float:
    """Z_m / pi_m for a fresh environment draw, by count-level simulation.

    Rejection-restarts (fresh environment and population) on extinction when
    conditioning.  Once the population passes the freeze threshold the
    current ratio is returned: the martingale property keeps its conditional
    mean exact and the remaining fluctuation is O(population^-1/2).
    """
    if m < 1:
        raise ValueError("horizon m must be >= 1")
    while True:
        idx = model.draw_indices(rng, m)
        z = 1
        pi = 1.0
        for g in range(m):
            law = model.support[idx[g]]
            pi *= law.mean()
            z = law.sample_total(rng, z)
            if z == 0 or z >= _FREEZE_POPULATION:
                break
        if z > 0:
            return z / pi
        if not condition_on_survival:
            return 0.0


class ClusterSampler:
    """Two-stage samplers for the cluster laws of one realized environment."""

    def __init__(self, stream: EnvStream, cfg: LimitConfig):
        self.stream = stream
        self.cfg = cfg
        sv, terms = _series_terms("cluster_size", stream, cfg)
        self.size_norm = sv
        self._size_cum = np.cumsum(terms)
        _, vec_terms = _series_terms("_inverse_mean_next", stream, cfg)
        self._vec_cum = np.cumsum(vec_terms)
        self._pmf_cums: dict = {}

    def _draw_index(self, cum: np.ndarray, rng) -> int:
        return int(np.searchsorted(cum, rng.random() * cum[-1], side="right").clip(0, cum.size - 1))

    def _draw_size(self, i: int, rng, conditioned: bool) -> int:
        """Z_i draw from the cached truncated pmf, conditioned on >= 1 if asked.

        The mass past the degree cap is resolved by direct population
        simulation conditioned to land past the cap.
        """
        if i == 0:
            return 1
        key = (i, conditioned)
        if key not in self._pmf_cums:
            pmf = self.stream.gen_size_pmf(i)
            start = 1 if conditioned else 0
            cum = np.cumsum(pmf.probs[start:])
            total = (cum[-1] if cum.size else 0.0) + pmf.mass_beyond
            self._pmf_cums[key] = (start, cum, total, pmf.degree)
        start, cum, total, degree = self._pmf_cums[key]
        if total <= 0.0:
            raise RejectionCapExceeded(f"generation {i} has no reachable mass")
        u = rng.random() * total
        if cum.size and u < cum[-1]:
            return start + int(np.searchsorted(cum, u, side="right"))
        for _ in range(_REJECTION_CAP):
            z = self.stream.simulate_population(i, rng)
            if z > degree:
                return z
        raise RejectionCapExceeded("beyond-cap cluster draw failed to land past the cap")

    def sample_size(self, rng) -> int:
        """The number of final-generation descendants of one big jump."""
        i = self._draw_index(self._size_cum, rng)
        return self._draw_size(i, rng, conditioned=True)

    def sample_brood_vector(self, rng) -> Tuple[int, np.ndarray]:
        """A brood size V and the V descendant counts, not all zero."""
        for _ in range(_REJECTION_CAP):
            i = self._draw_index(self._vec_cum, rng)
            v = self.stream.law(i).sample_many(rng, 1)[0]
            if v == 0:
                continue
            sizes = np.array([self._draw_size(i, rng, conditioned=False) for k in range(v)])
            if sizes.any():
                return int(v), sizes
        raise RejectionCapExceeded("brood-vector rejection budget exhausted")

    def single_descendant_prob(self) -> float:
        """P(cluster size = 1): the chance one big jump shows up alone."""
        total = 0.0
        for i in range(self._size_cum.size):
            if i == 0:
                total += 1.0 / self.stream.pi(0)
                continue
            pmf = self.stream.gen_size_pmf(i)
            if pmf.degree >= 1:
                total += pmf.probs[1] / self.stream.pi(i)
        return total / self.size_norm.value


def sample_cluster_R(stream: EnvStream, cfg: LimitConfig, rng) -> int:
    """One cluster-size draw; see :meth:`ClusterSampler.sample_size`."""
    return ClusterSampler(stream, cfg).sample_size(rng)


def sample_cluster_VR(stream: EnvStream, cfg: LimitConfig, rng) -> Tuple[int, np.ndarray]:
    """One brood-vector draw; see :meth:`ClusterSampler.sample_brood_vector`."""
    return ClusterSampler(stream, cfg).sample_brood_vector(rng)


def _pattern_sums(model: DisplacementModel, v: int, cache: dict) -> np.ndarray:
    """S[k] = total pattern mass over length-v patterns with k exceedances."""
    if v in cache:
        return cache[v]
    if v > _MAX_PATTERN_BROOD:
        raise ValueError(f"pattern enumeration over 2^{v} patterns refused")
    sums = np.zeros(v + 1)
    if model.mode == "iid":
        sums[1] = v * model.p
    elif model.mode == "full_dep":
        sums[v] = model.p
    else:
        for k in range(1, v + 1):
            for ones in itertools.combinations(range(v), k):
                bits = [0] * v
                for j in ones:
                    bits[j] = 1
                sums[k] += pattern_mass(model, Pattern(tuple(bits)))
    cache[v] = sums
    return sums


def _general_q_series(
    disp: DisplacementModel, stream: EnvStream, cfg: LimitConfig
) -> SeriesValue:
    """The environment part of the mixing scale via pattern-mass sums."""
    vmaxes = [law.support_max for law in stream.model.support]
    if any(v is None for v in vmaxes):
        raise UnboundedProgenyInGeneralMode(
            "pattern-sum evaluation needs bounded progeny support"
        )
    if disp.mode == "discrete_angular" and max(vmaxes) > disp.n_coords:
        raise ValueError("progeny support exceeds the angular coordinate count")
    cache: dict = {}
    g_model = stream.model.min_support_mean()
    value = 0.0
    recent: List[float] = []
    for i in range(cfg.max_terms):
        law = stream.law(i)
        e_i = stream.extinct_prob(i)
        inner = 0.0
        for v in range(1, law.support_max + 1):
            pv = law.pmf(v)
            if pv == 0.0:
                continue
            sums = _pattern_sums(disp, v, cache)
            ks = np.arange(1, v + 1)
            inner += pv * float((1.0 - e_i ** ks) @ sums[1:])
        value += inner / stream.pi(i + 1)
        recent.append(law.mean())
        if len(recent) > _GROWTH_WINDOW:
            recent.pop(0)
        growth = g_model if g_model > 1.0 else min(recent)
        if growth > 1.0 and value > 0.0:
            # each term is at most p * 1/pi_i (single-coordinate union bound)
            tail = (1.0 / stream.pi(i)) / (growth - 1.0)
            if tail < cfg.series_tol * value:
                return SeriesValue(value, tail, i + 1)
    raise NonGeometricGrowth("pattern series did not certify its tail")


def sample_q(
    disp: DisplacementModel,
    env_model: EnvironmentModel,
    cfg: LimitConfig,
    rng,
    method: str = "auto",
) -> QSample:
    """One draw of the mixing scale Q of the limit maximum.

    ``method="auto"`` uses the closed shortcuts for the iid and fully
    dependent modes and the pattern-sum series otherwise; ``"general"``
    forces the pattern-sum route (bounded progeny only), ``"shortcut"``
    forces the closed forms.
    """
    if method not in ("auto", "shortcut", "general"):
        raise ValueError(f"unknown method {method!r}")
    w = sample_martingale_limit(env_model, cfg.w_horizon, True, rng)
    stream = EnvStream(env_model, rng, cfg.degree_cap)
    use_general = method == "general" or (
        method == "auto" and disp.mode == "discrete_angular"
    )
    if use_general:
        sv = _general_q_series(disp, stream, cfg)
        q = w * sv.value
    elif disp.mode == "iid":
        sv = cluster_norm_series("cluster_size", stream, cfg)
        q = w * disp.p * sv.value
    elif disp.mode == "full_dep":
        sv = cluster_norm_series("cluster_vector", stream, cfg)
        q = w * disp.p * sv.value
    else:
        raise ValueError("discrete_angular mode has no shortcut; use the general method")
    return QSample(q=q, w=w, env_prime_summary=stream.indices_used, c_value=sv.value)


def limit_max_cdf(q_samples: List[QSample], x: float, alpha: float) -> float:
    """Monte Carlo limit CDF of the normalised maximum at x."""
    if not q_samples:
        raise ValueError("need at least one sample")
    if not x > 0.0:
        raise ValueError("x must be positive")
    qs = np.array([s.q for s in q_samples])
    return float(np.mean(np.exp(-(x ** -alpha) * qs)))


def joint_min_max_cdf(
    q_samples: List[QSample], x: float, y: float, alpha: float, p: float
) -> float:
    """P(limit min > -y, limit max <= x) for tail-independent displacements."""
    if not (x > 0.0 and y > 0.0):
        raise ValueError("x and y must be positive")
    t = np.array([s.w * s.c_value for s in q_samples])
    return float(np.mean(np.exp(-t * (p * x ** -alpha + (1.0 - p) * y ** -alpha))))


def top_two_cdf(
    q_samples: List[QSample], x: float, y: float, alpha: float, p: float
) -> float:
    """P(largest <= y, second largest <= x) for 0 < x < y, tail-independent
    mode, ignoring the chance that the extremal cluster has size one.

    See :func:`top_two_cdf_multiplicity_adjusted` for the variant that
    accounts for cluster multiplicities; at finite scale the adjusted form is
    the one empirical top-two statistics actually approach.
    """
    if not 0.0 < x <= y:
        raise ArgumentOrder("top-two law needs 0 < x <= y")
    t = np.array([s.w * s.c_value for s in q_samples])
    xa = x ** -alpha
    return float(np.mean(np.exp(-p * t * xa) * (1.0 + p * t * (xa - y ** -alpha))))


def top_two_cdf_multiplicity_adjusted(
    q_samples: List[QSample],
    x: float,
    y: float,
    alpha: float,
    p: float,
    single_probs,
) -> float:
    """Top-two limit law with the cluster-of-size-one correction.

    A lone point in (x, y] only leaves the second maximum below x when its
    cluster multiplicity is exactly 1, so the interval term carries the
    quenched single-descendant probability (one value per sample).
    """
    if not 0.0 < x <= y:
        raise ArgumentOrder("top-two law needs 0 < x <= y")
    t = np.array([s.w * s.c_value for s in q_samples])
    r1 = np.asarray(single_probs, dtype=float)
    if r1.shape != t.shape:
        raise ValueError("need one single-descendant probability per sample")
    xa = x ** -alpha
    return float(np.mean(np.exp(-p * t * xa) * (1.0 + p * t * (xa - y ** -alpha) * r1)))


def sample_limit_point_process(
    disp: DisplacementModel,
    env_model: EnvironmentModel,
    cfg: LimitConfig,
    rng,
) -> Tuple[PointMeasure, float]:
    """One draw of the limit extremal process, plus its realized scale.

    Radial points fall on (u_min, inf) with the alpha-homogeneous intensity;
    every point carries a cluster drawn from the quenched laws of a fresh
    environment, and the whole picture is scaled by
    (series * martingale_limit)^(1/alpha).  Atoms below scale * u_min are not
    represented, so test functionals must stay above that floor.
    """
    w = sample_martingale_limit(env_model, cfg.w_horizon, True, rng)
    stream = EnvStream(env_model, rng, cfg.degree_cap)
    sampler = ClusterSampler(stream, cfg)
    inv_alpha = 1.0 / disp.alpha
    if disp.mode == "iid":
        c = sampler.size_norm.value
    else:
        c, _ = _series_terms("cluster_vector", stream, cfg)
        c = c.value
    scale = (c * w) ** inv_alpha

    rate = cfg.u_min ** -disp.alpha
    if disp.mode == "discrete_angular":
        rate *= disp.angular_total_mass
    n_pts = int(rng.poisson(rate))
    if n_pts == 0:
        return PointMeasure.empty(), scale
    radii = cfg.u_min * rng.random(n_pts) ** -inv_alpha

    locs: List[float] = []
    mults: List[int] = []
    if disp.mode == "iid":
        signs = np.where(rng.random(n_pts) < disp.p, 1.0, -1.0)
        for l in range(n_pts):
            locs.append(scale * signs[l] * radii[l])
            mults.append(sampler.sample_size(rng))
    elif disp.mode == "full_dep":
        signs = np.where(rng.random(n_pts) < disp.p, 1.0, -1.0)
        for l in range(n_pts):
            _, sizes = sampler.sample_brood_vector(rng)
            locs.append(scale * signs[l] * radii[l])
            mults.append(int(sizes.sum()))
    else:
        weights = np.asarray(disp.weights)
        cum = np.cumsum(weights / weights.sum())
        atom_idx = np.searchsorted(cum, rng.random(n_pts), side="right")
        atoms = disp.atom_matrix()
        for l in range(n_pts):
            v, sizes = sampler.sample_brood_vector(rng)
            coords = atoms[atom_idx[l], :v]
            for k in range(v):
                if sizes[k] >= 1 and coords[k] != 0.0:
                    locs.append(scale * radii[l] * coords[k])
                    mults.append(int(sizes[k]))
    return PointMeasure.from_atoms(np.array(locs), np.array(mults)), scale
