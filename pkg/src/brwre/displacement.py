"""Heavy-tailed brood displacements and the limit tail measure.

Three dependence regimes share one marginal: P(|X| > t) = t^(-alpha) exactly
(Pareto, no slowly varying correction), positive-tail balance p.

* iid: children of one parent displace independently.
* full_dep: the whole brood shares one signed draw.
* discrete_angular: a discrete spectral measure on the unit sphere; radius
  Pareto, brood coordinate j moves by radius * atom_j.  Signs live in the
  atoms, so the balance p is derived, not free.

The limit tail measure is standardised so the single-coordinate exceedance
mass nu({|x_1| > 1}) equals 1; pattern masses over products of (-inf, 1] and
(1, inf] then have the closed forms implemented in :func:`pattern_mass`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MODES = ("iid", "full_dep", "discrete_angular")

_MARGINAL_TOL = 1e-9


@dataclass(frozen=True)
class Pattern:
    """Which coordinates of a size-v brood exceed the threshold."""

    bits: tuple

    def __post_init__(self):
        if len(self.bits) < 1 or any(b not in (0, 1) for b in self.bits):
            raise ValueError("pattern must be a nonempty 0/1 vector")
        object.__setattr__(self, "bits", tuple(int(b) for b in self.bits))

    @property
    def v(self) -> int:
        return len(self.bits)

    @property
    def ones(self) -> int:
        return sum(self.bits)


@dataclass(frozen=True)
class DisplacementModel:
    alpha: float
    p: float
    mode: str
    atoms: tuple = ()
    weights: tuple = ()

    def __post_init__(self):
        if not self.alpha > 0.0:
            raise ValueError("tail index alpha must be positive")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("tail balance p must lie in [0, 1]")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "discrete_angular":
            self._validate_angular()
        elif self.atoms or self.weights:
            raise ValueError("atoms/weights only apply to discrete_angular mode")

    def _validate_angular(self):
        atoms = np.asarray(self.atoms, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if atoms.ndim != 2 or atoms.shape[0] != weights.size or atoms.shape[0] == 0:
            raise ValueError("angular mode needs matching atom and weight vectors")
        if np.any(weights <= 0.0):
            raise ValueError("angular weights must be positive")
        norms = np.sqrt((atoms ** 2).sum(axis=1))
        if np.any(np.abs(norms - 1.0) > _MARGINAL_TOL):
            raise ValueError("angular atoms must have unit Euclidean norm")
        # Identical marginals and consistent tail balance across coordinates.
        a = self.alpha
        marg = weights @ np.abs(atoms) ** a
        if np.any(np.abs(marg - 1.0) > _MARGINAL_TOL):
            raise ValueError(
                "angular weights are not standardised: per-coordinate exceedance "
                f"masses {marg} must all equal 1"
            )
        bal = weights @ np.clip(atoms, 0.0, None) ** a
        if np.any(np.abs(bal - self.p) > _MARGINAL_TOL):
            raise ValueError(f"per-coordinate balance {bal} differs from p={self.p}")

    @classmethod
    def iid(cls, alpha: float, p: float) -> "DisplacementModel":
        return cls(alpha=alpha, p=p, mode="iid")

    @classmethod
    def full_dep(cls, alpha: float, p: float) -> "DisplacementModel":
        return cls(alpha=alpha, p=p, mode="full_dep")

    @classmethod
    def discrete_angular(cls, alpha: float, atoms, weights) -> "DisplacementModel":
        """Build an angular model, rescaling weights to the standard marginal.

        Input weights are positive but otherwise free; they are rescaled so
        that the first-coordinate exceedance mass equals 1.  The balance p is
        derived from the atoms and validated to be identical across
        coordinates.
        """
        atoms = np.asarray(atoms, dtype=float)
        weights = np.asarray(weights, dtype=float)
        if atoms.ndim != 2:
            raise ValueError("atoms must be a matrix, one unit vector per row")
        norms = np.sqrt((atoms ** 2).sum(axis=1))
        if np.any(norms <= 0.0):
            raise ValueError("angular atoms must be nonzero")
        atoms = atoms / norms[:, None]
        scale = weights @ np.abs(atoms[:, 0]) ** alpha
        if scale <= 0.0:
            raise ValueError("first coordinate carries no tail mass")
        weights = weights / scale
        p = float(weights @ np.clip(atoms[:, 0], 0.0, None) ** alpha)
        return cls(
            alpha=alpha,
            p=p,
            mode="discrete_angular",
            atoms=tuple(tuple(row) for row in atoms),
            weights=tuple(weights),
        )

    @classmethod
    def diagonal_angular(cls, alpha: float, k: int, p: float = 1.0) -> "DisplacementModel":
        """Fully dependent tails as an angular model: +/- diagonal atoms."""
        diag = np.full(k, k ** -0.5)
        if p >= 1.0:
            return cls.discrete_angular(alpha, [diag], [1.0])
        if p <= 0.0:
            return cls.discrete_angular(alpha, [-diag], [1.0])
        return cls.discrete_angular(alpha, [diag, -diag], [p, 1.0 - p])

    @property
    def n_coords(self) -> int:
        return len(self.atoms[0]) if self.mode == "discrete_angular" else 0

    @property
    def angular_total_mass(self) -> float:
        """Total spectral mass; scales the radial point-process intensity."""
        return float(sum(self.weights))

    @property
    def radial_floor(self) -> float:
        """Smallest radius the angular sampler can emit."""
        return self.angular_total_mass ** (1.0 / self.alpha)

    def atom_matrix(self) -> np.ndarray:
        return np.asarray(self.atoms, dtype=float)


def norming_constant(pi_n: float, alpha: float) -> float:
    """Spatial normalisation for generation n: the (1/pi_n)-tail quantile.

    With the exact Pareto marginal this is pi_n**(1/alpha), floored at 1
    because the quantile is taken over s >= 1.
    """
    if not pi_n > 0.0:
        raise ValueError("pi_n must be positive")
    return max(1.0, pi_n ** (1.0 / alpha))


def _pareto_magnitudes(size: int, inv_alpha: float, rng) -> np.ndarray:
    u = rng.random(size)
    if inv_alpha == 0.5:
        # reciprocal square root is far cheaper than a general power
        np.sqrt(u, out=u)
        np.reciprocal(u, out=u)
    else:
        np.power(u, -inv_alpha, out=u)
    return u


def _apply_signs(mags: np.ndarray, p: float, rng) -> np.ndarray:
    if p >= 1.0:
        return mags
    if p <= 0.0:
        np.negative(mags, out=mags)
        return mags
    neg = rng.random(mags.size) >= p
    mags[neg] *= -1.0
    return mags


def brood_flat(model: DisplacementModel, counts: np.ndarray, rng) -> np.ndarray:
    """Displacements for all children of one generation, parent by parent.

    ``counts[i]`` children for parent i; the result is flat, ordered by parent
    then within-brood rank.  The rng consumption order is part of the
    replay/oracle contract: counts first (by the caller), then one batched
    magnitude draw, then one batched sign draw where applicable.
    """
    counts = np.asarray(counts, dtype=np.int64)
    total = int(counts.sum())
    inv_alpha = 1.0 / model.alpha
    if model.mode == "iid":
        return _apply_signs(_pareto_magnitudes(total, inv_alpha, rng), model.p, rng)
    if model.mode == "full_dep":
        vals = _apply_signs(_pareto_magnitudes(counts.size, inv_alpha, rng), model.p, rng)
        return np.repeat(vals, counts)
    # discrete_angular
    k = model.n_coords
    if counts.size and counts.max() > k:
        raise ValueError(
            f"brood of size {int(counts.max())} exceeds the {k} angular coordinates"
        )
    w = np.asarray(model.weights)
    cum = np.cumsum(w / w.sum())
    atom_idx = np.searchsorted(cum, rng.random(counts.size), side="right")
    radii = model.radial_floor * _pareto_magnitudes(counts.size, inv_alpha, rng)
    parent = np.repeat(np.arange(counts.size), counts)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    rank = np.arange(total) - np.repeat(starts, counts)
    atoms = model.atom_matrix()
    return radii[parent] * atoms[atom_idx[parent], rank]


def sample_brood(model: DisplacementModel, v: int, rng) -> np.ndarray:
    """One displacement vector for the v children of a single parent."""
    if v < 1:
        raise ValueError("brood size must be >= 1")
    return brood_flat(model, np.array([v], dtype=np.int64), rng)


def pattern_mass(model: DisplacementModel, pattern: Pattern) -> float:
    """Limit-measure mass of the exceedance pattern region.

    Coordinates with bit 1 must exceed 1, bits 0 must not; coordinates past
    the pattern are unconstrained.  Requires at least one exceeding
    coordinate (the all-zero region has infinite mass near the origin).
    """
    if pattern.ones < 1:
        raise ValueError("pattern must have at least one exceeding coordinate")
    if model.mode == "iid":
        return model.p if pattern.ones == 1 else 0.0
    if model.mode == "full_dep":
        return model.p if pattern.ones == pattern.v else 0.0
    v = pattern.v
    if v > model.n_coords:
        raise ValueError(f"pattern length {v} exceeds the {model.n_coords} coordinates")
    alpha = model.alpha
    total = 0.0
    for atom, w in zip(model.atom_matrix(), model.weights):
        a = atom[:v]
        lo = 0.0
        feasible = True
        hi = math.inf
        for bit, aj in zip(pattern.bits, a):
            if bit:
                if aj <= 0.0:
                    feasible = False
                    break
                lo = max(lo, 1.0 / aj)
            elif aj > 0.0:
                hi = min(hi, 1.0 / aj)
        if not feasible or hi <= lo or lo <= 0.0:
            continue
        total += w * (lo ** -alpha - (0.0 if math.isinf(hi) else hi ** -alpha))
    return total
