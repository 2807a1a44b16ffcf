"""Generation-by-generation simulation of the branching random walk.

The streaming simulator keeps one flat array per particle attribute and never
revisits the genealogy; a deliberately naive twin materialises the full
labelled tree and recomputes everything from scratch.  Both consume random
draws in the identical order (per generation: child counts, then the batched
brood displacements), so equal seeds must give bit-identical outcomes.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .displacement import DisplacementModel, brood_flat, norming_constant
from .environment import EnvironmentModel, EnvSequence, sample_env
from .errors import PopulationCapExceeded
from .measures import PointMeasure

DEFAULT_POPULATION_CAP = 1 << 24


@dataclass(frozen=True)
class SimConfig:
    n: int
    env: EnvironmentModel
    disp: DisplacementModel
    retain_delta: float = 0.05
    top_k: int = 2
    population_cap: int = DEFAULT_POPULATION_CAP
    condition_on_survival: bool = True
    jump_eta: float = 0.1
    seed: int = 0
    # locating the argmax leaf's biggest path jump costs extra per-particle
    # state; switch it off for very large populations
    track_argmax_jump: bool = True

    def __post_init__(self):
        if self.n < 1 or self.population_cap < 1 or self.top_k < 2:
            raise ValueError("need n >= 1, population_cap >= 1, top_k >= 2")
        if not (self.retain_delta > 0.0 and self.jump_eta > 0.0):
            raise ValueError("retain_delta and jump_eta must be positive")


@dataclass
class Diagnostics:
    paths_with_two_big_jumps: int
    big_jump_generations: np.ndarray  # index = generation of the child, 1..n
    max_leaf_jump_gen: Optional[int]  # generation of the largest |X| on the max leaf's path


@dataclass
class BrwOutcome:
    env_seq: EnvSequence
    z: np.ndarray  # generation sizes Z_0..Z_n
    b_n: float
    atoms: PointMeasure
    top: np.ndarray  # largest positions, descending
    bottom: np.ndarray  # smallest positions, ascending
    w_n: float
    diagnostics: Diagnostics
    restarts: int

    @property
    def extinct(self) -> bool:
        return int(self.z[-1]) == 0


def replication_rng(seed: int, rep: int) -> np.random.Generator:
    """The per-replication stream: a keyed hash of (seed, index)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, rep))))


def draw_generation(law, disp: DisplacementModel, n_parents: int, rng, cap: int):
    """Child counts and flat brood displacements for one generation.

    Shared by the streaming simulator and the naive oracle so that both see
    the same random stream.
    """
    counts = law.sample_many(rng, n_parents)
    total = int(counts.sum())
    if total > cap:
        raise PopulationCapExceeded(f"generation size {total} exceeds cap {cap}")
    if total == 0:
        return counts, np.empty(0)
    return counts, brood_flat(disp, counts, rng)


def _empty_outcome(env_seq, z, b, restarts, n) -> BrwOutcome:
    diags = Diagnostics(0, np.zeros(n + 1, dtype=np.int64), None)
    return BrwOutcome(
        env_seq=env_seq,
        z=z,
        b_n=b,
        atoms=PointMeasure.empty(),
        top=np.empty(0),
        bottom=np.empty(0),
        w_n=0.0,
        diagnostics=diags,
        restarts=restarts,
    )


def simulate(config: SimConfig, rng=None) -> BrwOutcome:
    """One replication; restarts with a fresh environment until survival
    when ``condition_on_survival`` is set."""
    if rng is None:
        rng = replication_rng(config.seed, 0)
    n = config.n
    restarts = 0
    while True:
        env_seq = sample_env(config.env, n, rng)
        b = norming_constant(env_seq.pi[n], config.disp.alpha)
        thr_jump = config.jump_eta * b
        thr_big = config.retain_delta * b

        track = config.track_argmax_jump
        pos = np.zeros(1)
        jumps = np.zeros(1, dtype=np.int16)
        best_abs = np.zeros(1)
        best_gen = np.zeros(1, dtype=np.int16)
        z = np.zeros(n + 1, dtype=np.int64)
        z[0] = 1
        hist = np.zeros(n + 1, dtype=np.int64)
        extinct_at = None
        for g in range(n):
            counts, x = draw_generation(
                env_seq.laws[g], config.disp, pos.size, rng, config.population_cap
            )
            total = x.size
            if total == 0:
                extinct_at = g + 1
                break
            z[g + 1] = total
            absx = np.abs(x)
            big = absx > thr_jump
            hist[g + 1] = int(big.sum()) if thr_big == thr_jump else int((absx > thr_big).sum())
            jumps = np.repeat(jumps, counts)
            jumps += big
            rep_pos = np.repeat(pos, counts)
            np.add(rep_pos, x, out=rep_pos)
            pos = rep_pos
            if track:
                rep_best = np.repeat(best_abs, counts)
                bigger = absx > rep_best
                np.maximum(rep_best, absx, out=rep_best)
                best_abs = rep_best
                best_gen = np.where(bigger, np.int16(g + 1), np.repeat(best_gen, counts))

        if extinct_at is not None:
            if config.condition_on_survival:
                restarts += 1
                continue
            return _empty_outcome(env_seq, z, b, restarts, n)

        k = min(config.top_k, pos.size)
        top = np.sort(np.partition(pos, pos.size - k)[pos.size - k :])[::-1].copy()
        bottom = np.sort(np.partition(pos, k - 1)[:k])
        keep = np.abs(pos) > config.retain_delta * b
        atoms = PointMeasure.from_locations(pos[keep] / b)
        diags = Diagnostics(
            paths_with_two_big_jumps=int((jumps >= 2).sum()),
            big_jump_generations=hist,
            max_leaf_jump_gen=int(best_gen[int(np.argmax(pos))]) if track else None,
        )
        return BrwOutcome(
            env_seq=env_seq,
            z=z,
            b_n=b,
            atoms=atoms,
            top=top,
            bottom=bottom,
            w_n=float(z[n] / env_seq.pi[n]),
            diagnostics=diags,
            restarts=restarts,
        )


def simulate_naive(config: SimConfig, rng=None) -> BrwOutcome:
    """Full-tree oracle: materialise every labelled vertex, recompute
    positions by walking each leaf's ancestry, aggregate from scratch."""
    if rng is None:
        rng = replication_rng(config.seed, 0)
    n = config.n
    restarts = 0
    while True:
        env_seq = sample_env(config.env, n, rng)
        b = norming_constant(env_seq.pi[n], config.disp.alpha)
        # generations[g] = (parent index array, displacement array)
        generations = [(np.array([-1]), np.array([0.0]))]
        extinct_at = None
        for g in range(n):
            n_parents = generations[g][0].size
            counts, x = draw_generation(
                env_seq.laws[g], config.disp, n_parents, rng, config.population_cap
            )
            if x.size == 0:
                extinct_at = g + 1
                break
            parent = np.repeat(np.arange(n_parents), counts)
            generations.append((parent, x))

        z = np.zeros(n + 1, dtype=np.int64)
        for g, (parent, _) in enumerate(generations):
            z[g] = parent.size
        if extinct_at is not None:
            if config.condition_on_survival:
                restarts += 1
                continue
            return _empty_outcome(env_seq, z, b, restarts, n)

        leaves = generations[n][0].size
        positions = np.zeros(leaves)
        two_jump_paths = 0
        best_abs = np.zeros(leaves)
        best_gen = np.zeros(leaves, dtype=np.int64)
        hist = np.zeros(n + 1, dtype=np.int64)
        thr_jump = config.jump_eta * b
        thr_big = config.retain_delta * b
        for g in range(1, n + 1):
            hist[g] = int((np.abs(generations[g][1]) > thr_big).sum())
        for leaf in range(leaves):
            node = leaf
            path = []
            for g in range(n, 0, -1):
                parent, x = generations[g]
                path.append(float(x[node]))
                node = int(parent[node])
            path.reverse()
            # accumulate root-to-leaf so the float additions associate the
            # same way as in the streaming simulator
            total = 0.0
            n_big = 0
            for g, step in enumerate(path, start=1):
                total += step
                if abs(step) > thr_jump:
                    n_big += 1
                if abs(step) > best_abs[leaf]:
                    best_abs[leaf] = abs(step)
                    best_gen[leaf] = g
            positions[leaf] = total
            if n_big >= 2:
                two_jump_paths += 1

        order = np.argsort(positions)
        k = min(config.top_k, leaves)
        top = positions[order][-k:][::-1].copy()
        bottom = positions[order][:k].copy()
        grouped = {}
        for value in positions:
            if abs(value) > config.retain_delta * b:
                key = value / b
                grouped[key] = grouped.get(key, 0) + 1
        locs = sorted(grouped)
        atoms = PointMeasure(np.array(locs), np.array([grouped[v] for v in locs], dtype=np.int64))
        arg = int(np.argmax(positions))
        diags = Diagnostics(
            paths_with_two_big_jumps=two_jump_paths,
            big_jump_generations=hist,
            max_leaf_jump_gen=int(best_gen[arg]) if config.track_argmax_jump else None,
        )
        return BrwOutcome(
            env_seq=env_seq,
            z=z,
            b_n=b,
            atoms=atoms,
            top=top,
            bottom=bottom,
            w_n=float(z[n] / env_seq.pi[n]),
            diagnostics=diags,
            restarts=restarts,
        )


def extremal_process(outcome: BrwOutcome) -> PointMeasure:
    """The retained normalised positions of one replication."""
    return outcome.atoms


def _run_chunk(config: SimConfig, reps: range) -> List[BrwOutcome]:
    return [simulate(config, replication_rng(config.seed, r)) for r in reps]


def run_replications(config: SimConfig, reps: int, threads: int = 1) -> List[BrwOutcome]:
    """Independent replications with per-index derived streams.

    Results are ordered by replication index regardless of worker count.
    """
    if reps < 1:
        raise ValueError("need at least one replication")
    if threads <= 1 or reps == 1:
        return _run_chunk(config, range(reps))
    workers = min(threads, reps)
    chunks = [range(i, reps, workers) for i in range(workers)]
    out: List[Optional[BrwOutcome]] = [None] * reps
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for chunk, results in zip(chunks, pool.map(_run_chunk, [config] * workers, chunks)):
            for r, res in zip(chunk, results):
                out[r] = res
    return out  # type: ignore[return-value]


def diagnostics_report(outcomes: List[BrwOutcome], rho: int) -> dict:
    """Big-jump summaries across replications.

    ``two_jump_fraction``: replications where some leaf path carries two or
    more displacements past the jump threshold.  ``early_jump_fraction``: the
    share of retained-scale jumps that happened before the last ``rho``
    generations.
    """
    if not outcomes:
        raise ValueError("need at least one outcome")
    n = outcomes[0].z.size - 1
    two = np.mean([o.diagnostics.paths_with_two_big_jumps > 0 for o in outcomes])
    early = 0
    total = 0
    for o in outcomes:
        hist = o.diagnostics.big_jump_generations
        total += int(hist.sum())
        early += int(hist[: max(0, n - rho)].sum())
    return {
        "two_jump_fraction": float(two),
        "early_jump_fraction": float(early / total) if total else 0.0,
    }
