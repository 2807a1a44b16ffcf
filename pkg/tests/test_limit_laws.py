import math

import numpy as np
import pytest
from scipy import stats as st

from brwre.displacement import DisplacementModel
from brwre.environment import EnvironmentModel
from brwre.errors import ArgumentOrder, NonGeometricGrowth, UnboundedProgenyInGeneralMode
from brwre.limit_laws import (
    ClusterSampler,
    EnvStream,
    LimitConfig,
    QSample,
    cluster_norm_series,
    joint_min_max_cdf,
    limit_max_cdf,
    sample_cluster_R,
    sample_cluster_VR,
    sample_limit_point_process,
    sample_martingale_limit,
    sample_q,
    top_two_cdf,
    top_two_cdf_multiplicity_adjusted,
)
from brwre.offspring import Binomial, Deterministic, Finite, Geometric, Poisson

BINARY = EnvironmentModel.single(Deterministic(2))
POISSON2 = EnvironmentModel.single(Poisson(2.0))
MIXTURE = EnvironmentModel((Poisson(2.0), Poisson(3.0)), (0.5, 0.5))
BOUNDED_MIX = EnvironmentModel((Binomial(3, 0.7), Finite((0.2, 0.3, 0.5))), (0.5, 0.5))
CFG = LimitConfig()


def fresh_stream(model, rng, cfg=CFG) -> EnvStream:
    return EnvStream(model, rng, cfg.degree_cap)


# ---------------------------------------------------------------- martingale


def test_martingale_limit_deterministic_is_one(rng):
    assert sample_martingale_limit(BINARY, 12, True, rng) == 1.0


def test_martingale_limit_unconditioned_mean(rng):
    n = 100_000
    w = np.array([sample_martingale_limit(POISSON2, 10, False, rng) for _ in range(n)])
    assert abs(w.mean() - 1.0) < 3 * w.std() / math.sqrt(n)


def test_martingale_limit_conditioned_positive(rng):
    for _ in range(200):
        assert sample_martingale_limit(MIXTURE, 8, True, rng) > 0.0


# -------------------------------------------------------------------- series


def test_series_deterministic_binary(rng):
    stream = fresh_stream(BINARY, rng)
    c0 = cluster_norm_series("inverse_mean", stream, CFG)
    c3 = cluster_norm_series("cluster_size", stream, CFG)
    c1 = cluster_norm_series("cluster_vector", stream, CFG)
    c2 = cluster_norm_series("cluster_vector_leafless", stream, CFG)
    assert c0.value == pytest.approx(2.0, rel=1e-8)
    assert c3.value == pytest.approx(2.0, rel=1e-8)
    assert c1.value == pytest.approx(1.0, rel=1e-8)
    assert c2.value == pytest.approx(1.0, rel=1e-8)
    assert c0.tail_bound < CFG.series_tol * c0.value


@pytest.mark.parametrize("k", [2, 3, 5])
def test_series_deterministic_k_geometric_sum(k, rng):
    stream = fresh_stream(EnvironmentModel.single(Deterministic(k)), rng)
    c0 = cluster_norm_series("inverse_mean", stream, CFG)
    assert c0.value == pytest.approx(k / (k - 1.0), rel=1e-8)


def test_leafless_size_series_equals_inverse_mean(rng):
    # every generation survives, so the survival weight is 1
    leafless = EnvironmentModel((Deterministic(2), Finite((0.0, 0.4, 0.6))), (0.5, 0.5))
    stream = fresh_stream(leafless, rng)
    a = cluster_norm_series("inverse_mean", stream, CFG)
    b = cluster_norm_series("cluster_size", stream, CFG)
    assert a.value == pytest.approx(b.value, rel=1e-12)


def test_vector_norm_is_size_norm_minus_one(rng):
    # the brood-vector normalizer telescopes against the size normalizer
    for _ in range(5):
        stream = fresh_stream(MIXTURE, rng)
        c3 = cluster_norm_series("cluster_size", stream, CFG)
        c1 = cluster_norm_series("cluster_vector", stream, CFG)
        tol = c3.tail_bound + c1.tail_bound + 1e-12
        assert abs(c1.value - (c3.value - 1.0)) <= tol


def test_series_non_geometric_growth():
    critical = EnvironmentModel.single(Deterministic(1))
    with pytest.raises(NonGeometricGrowth):
        cluster_norm_series("inverse_mean", fresh_stream(critical, np.random.default_rng(0)), CFG)


def test_vector_norm_matches_direct_enumeration(rng):
    # first ten terms recomputed from the truncated pmf arrays, no pgf shortcuts
    env = EnvironmentModel.single(Finite((0.2, 0.3, 0.5)))
    stream = fresh_stream(env, rng)
    from brwre.limit_laws import _series_terms

    _, terms = _series_terms("cluster_vector", stream, CFG)
    law = env.support[0]
    for i in range(10):
        pmf = stream.gen_size_pmf(i)
        assert pmf.mass_beyond == 0.0
        s_total = pmf.probs.sum()
        dead = pmf.probs[0]
        direct = sum(
            law.pmf(v) * (s_total ** v - dead ** v) for v in range(1, 3)
        ) / stream.pi(i + 1)
        assert terms[i] == pytest.approx(direct, rel=1e-9)


# ---------------------------------------------------------------- cluster laws


def test_cluster_size_binary_support_and_pmf(rng):
    stream = fresh_stream(BINARY, rng)
    sampler = ClusterSampler(stream, CFG)
    n = 20_000
    draws = np.array([sampler.sample_size(rng) for _ in range(n)])
    logs = np.log2(draws)
    assert np.allclose(logs, np.round(logs))  # support in powers of two
    # chi-square against P(R = 2^i) = 2^-(i+1)
    i_vals = np.round(logs).astype(int)
    cap = 10
    obs = np.bincount(np.minimum(i_vals, cap), minlength=cap + 1)
    expect = np.array([n * 2.0 ** -(i + 1) for i in range(cap)] + [n * 2.0 ** -cap])
    stat = float(((obs - expect) ** 2 / expect).sum())
    assert stat < st.chi2.ppf(0.99, cap)


def test_cluster_size_ternary_support(rng):
    stream = fresh_stream(EnvironmentModel.single(Deterministic(3)), rng)
    sampler = ClusterSampler(stream, CFG)
    draws = [sampler.sample_size(rng) for _ in range(500)]
    logs = np.log(np.array(draws)) / np.log(3.0)
    assert np.allclose(logs, np.round(logs))


def test_cluster_size_poisson_vs_assembled_pmf(rng):
    # two-route check: sampled frequencies against the pmf assembled from the
    # quenched generation-size arrays
    stream = fresh_stream(POISSON2, rng)
    sampler = ClusterSampler(stream, CFG)
    terms = sampler.size_norm.terms_used
    rmax = 25
    pmf = np.zeros(rmax + 1)
    for i in range(terms):
        gen = stream.gen_size_pmf(i)
        upto = min(rmax, gen.degree)
        pmf[: upto + 1] += gen.probs[: upto + 1] / stream.pi(i)
    pmf /= sampler.size_norm.value
    n = 20_000
    draws = np.array([sampler.sample_size(rng) for _ in range(n)])
    obs = np.bincount(np.minimum(draws, rmax + 1), minlength=rmax + 2)[1:]
    expect = n * np.append(pmf[1:], max(1.0 - pmf[1:].sum(), 1e-12))
    keep = expect >= 5
    obs_k = np.append(obs[keep], obs[~keep].sum())
    exp_k = np.append(expect[keep], expect[~keep].sum())
    stat = float(((obs_k - exp_k) ** 2 / np.maximum(exp_k, 1e-9)).sum())
    assert stat < st.chi2.ppf(0.99, keep.sum())


def test_cluster_size_one_shot_wrapper(rng):
    stream = fresh_stream(BINARY, rng)
    draws = {sample_cluster_R(stream, CFG, rng) for _ in range(30)}
    assert all(r >= 1 and (r & (r - 1)) == 0 for r in draws)


def test_cluster_vector_binary(rng):
    stream = fresh_stream(BINARY, rng)
    for _ in range(40):
        v, sizes = sample_cluster_VR(stream, CFG, rng)
        assert v == 2
        assert sizes[0] == sizes[1]
        assert sizes[0] >= 1 and (sizes[0] & (sizes[0] - 1)) == 0  # power of two


def test_cluster_vector_marginal_matches_enumeration(rng):
    # P(V = v) enumerated from the series terms for a fixed Poisson environment
    stream = fresh_stream(POISSON2, rng)
    cfg = CFG
    sampler = ClusterSampler(stream, cfg)
    from brwre.limit_laws import _series_terms

    c1, _ = _series_terms("cluster_vector", stream, cfg)
    terms = c1.terms_used
    law = POISSON2.support[0]
    vmax = 12
    marginal = np.zeros(vmax + 1)
    for i in range(terms):
        e_i = stream.extinct_prob(i)
        for v in range(1, vmax + 1):
            marginal[v] += law.pmf(v) * (1.0 - e_i ** v) / stream.pi(i + 1)
    marginal /= c1.value
    n = 20_000
    draws = np.array([sampler.sample_brood_vector(rng)[0] for _ in range(n)])
    for v in range(1, 7):
        p = marginal[v]
        se = math.sqrt(p * (1 - p) / n)
        assert abs((draws == v).mean() - p) < 3 * se + 1e-3


def test_cluster_size_one_prob_binary(rng):
    stream = fresh_stream(BINARY, rng)
    sampler = ClusterSampler(stream, CFG)
    assert sampler.single_descendant_prob() == pytest.approx(0.5, rel=1e-8)


# ------------------------------------------------------------------- Q draws


def test_q_binary_iid_exact(rng):
    for p in (1.0, 0.4):
        s = sample_q(DisplacementModel.iid(2.0, p), BINARY, CFG, rng)
        assert s.q == pytest.approx(2.0 * p, rel=1e-8)
        assert s.w == 1.0
        assert s.c_value == pytest.approx(2.0, rel=1e-8)
        assert len(s.env_prime_summary) >= 1


def test_q_binary_full_dep_exact(rng):
    s = sample_q(DisplacementModel.full_dep(2.0, 1.0), BINARY, CFG, rng)
    assert s.q == pytest.approx(1.0, rel=1e-8)


def test_q_binary_angular_diagonal_exact(rng):
    s = sample_q(DisplacementModel.diagonal_angular(2.0, 2), BINARY, CFG, rng)
    assert s.q == pytest.approx(1.0, rel=1e-8)


def test_q_general_equals_shortcut_per_sample(rng):
    # identical W and environment streams via a shared seed
    for offset, disp in (
        (1000, DisplacementModel.iid(2.0, 0.6)),
        (2000, DisplacementModel.full_dep(2.0, 0.6)),
    ):
        for r in range(40):
            a = sample_q(disp, BOUNDED_MIX, CFG, np.random.default_rng((offset, r)), "shortcut")
            b = sample_q(disp, BOUNDED_MIX, CFG, np.random.default_rng((offset, r)), "general")
            assert abs(a.q - b.q) <= 1e-6 + CFG.series_tol * abs(a.q)


def test_q_general_rejects_unbounded_progeny(rng):
    with pytest.raises(UnboundedProgenyInGeneralMode):
        sample_q(DisplacementModel.iid(2.0, 1.0), POISSON2, CFG, rng, "general")


def test_q_angular_matches_full_dep_per_sample(rng):
    angular = DisplacementModel.diagonal_angular(2.0, 3, 0.7)
    full = DisplacementModel.full_dep(2.0, 0.7)
    env = EnvironmentModel.single(Binomial(3, 0.8))
    for r in range(25):
        a = sample_q(angular, env, CFG, np.random.default_rng(r), "general")
        b = sample_q(full, env, CFG, np.random.default_rng(r), "shortcut")
        assert abs(a.q - b.q) <= 1e-6 + CFG.series_tol * abs(a.q)


# ------------------------------------------------------------------ limit CDFs


def test_limit_max_cdf_degenerate():
    samples = [QSample(q=3.0, w=1.0, env_prime_summary=(), c_value=3.0)] * 4
    for x in (0.5, 1.0, 2.0):
        assert limit_max_cdf(samples, x, 2.0) == pytest.approx(math.exp(-3.0 * x ** -2.0))


def test_limit_max_cdf_binary_value(rng):
    qs = [sample_q(DisplacementModel.iid(2.0, 1.0), BINARY, CFG, rng) for _ in range(50)]
    assert limit_max_cdf(qs, 1.0, 2.0) == pytest.approx(math.exp(-2.0), rel=1e-6)


def test_limit_max_cdf_monotone_to_one():
    samples = [QSample(q=2.0, w=1.0, env_prime_summary=(), c_value=2.0)]
    vals = [limit_max_cdf(samples, x, 2.0) for x in (1.0, 5.0, 50.0, 5000.0)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert vals[-1] > 0.999999


def test_limit_max_cdf_homogeneity_algebraic():
    samples = [QSample(q=q, w=1.0, env_prime_summary=(), c_value=q) for q in (0.5, 2.0, 7.0)]
    s = 1.7
    scaled = [
        QSample(q=q.q * s ** 2.0, w=q.w, env_prime_summary=(), c_value=q.c_value)
        for q in samples
    ]
    for x in (0.8, 1.0, 2.5):
        assert limit_max_cdf(samples, x / s, 2.0) == pytest.approx(
            limit_max_cdf(scaled, x, 2.0), rel=1e-12
        )


def test_joint_min_max_examples(rng):
    qs = [sample_q(DisplacementModel.iid(2.0, 1.0), BINARY, CFG, rng) for _ in range(20)]
    # p = 1: no mass on the negative side, y is irrelevant
    a = joint_min_max_cdf(qs, 1.0, 0.3, 2.0, 1.0)
    b = joint_min_max_cdf(qs, 1.0, 30.0, 2.0, 1.0)
    assert a == pytest.approx(b, rel=1e-12)
    # p = 1/2 at x = y = 1: exponent is the full size normalizer
    c = joint_min_max_cdf(qs, 1.0, 1.0, 2.0, 0.5)
    assert c == pytest.approx(math.exp(-2.0), rel=1e-6)


def test_top_two_examples(rng):
    qs = [sample_q(DisplacementModel.iid(2.0, 1.0), BINARY, CFG, rng) for _ in range(20)]
    assert top_two_cdf(qs, 1.0, 1.0, 2.0, 1.0) == pytest.approx(math.exp(-2.0), rel=1e-6)
    with pytest.raises(ArgumentOrder):
        top_two_cdf(qs, 2.0, 1.0, 2.0, 1.0)
    # joint law sandwiched between the marginal CDFs at the two thresholds
    tt = top_two_cdf(qs, 1.0, 2.0, 2.0, 1.0)
    assert limit_max_cdf(qs, 1.0, 2.0) - 1e-12 <= tt <= limit_max_cdf(qs, 2.0, 2.0) + 1e-12


def test_top_two_multiplicity_adjusted_bounds(rng):
    qs = [sample_q(DisplacementModel.iid(2.0, 0.5), BINARY, CFG, rng) for _ in range(20)]
    plain = top_two_cdf(qs, 1.0, 2.0, 2.0, 0.5)
    adjusted = top_two_cdf_multiplicity_adjusted(qs, 1.0, 2.0, 2.0, 0.5, [0.5] * len(qs))
    assert adjusted < plain  # size-one clusters are rarer than clusters


# --------------------------------------------------------------- point process


def test_pp_radial_point_count(rng):
    cfg = LimitConfig(u_min=0.05, n_limit_samples=1)
    disp = DisplacementModel.iid(2.0, 1.0)
    n = 400
    counts = {1.0: [], 2.0: []}
    for _ in range(n):
        m, scale = sample_limit_point_process(disp, BINARY, cfg, rng)
        for u in counts:
            # atom radius in point units is |location| / scale
            counts[u].append(int((np.abs(m.locations / scale) > u).sum()))
    for u, vals in counts.items():
        vals = np.asarray(vals, dtype=float)
        lam = u ** -2.0
        assert abs(vals.mean() - lam) < 3 * math.sqrt(lam / n)


def test_pp_max_atom_frechet(rng):
    cfg = LimitConfig(u_min=0.2)
    disp = DisplacementModel.iid(2.0, 1.0)
    n = 4000
    maxima = np.empty(n)
    for i in range(n):
        m, _ = sample_limit_point_process(disp, BINARY, cfg, rng)
        maxima[i] = m.locations.max() if m.n_atoms else 0.0
    # independent oracle: Frechet with scale (C3 W)^(1/alpha) = sqrt(2)
    frechet = math.sqrt(2.0) * rng.exponential(size=n) ** -0.5
    assert st.ks_2samp(maxima, frechet).pvalue > 1e-4


def test_pp_full_dep_multiplicities(rng):
    cfg = LimitConfig(u_min=0.5)
    disp = DisplacementModel.full_dep(2.0, 1.0)
    m, _ = sample_limit_point_process(disp, BINARY, cfg, rng)
    assert np.all(m.multiplicities >= 2)  # binary broods: two lines survive


def test_pp_expected_count_above_threshold(rng):
    x = 1.3
    # u_min placed exactly at the coverage edge for this threshold
    cfg = LimitConfig(u_min=x / math.sqrt(2.0))
    disp = DisplacementModel.iid(2.0, 1.0)
    n = 600
    counts = np.array([
        sample_limit_point_process(disp, BINARY, cfg, rng)[0].n_atoms for _ in range(n)
    ], dtype=float)
    lam = 2.0 * x ** -2.0
    assert abs(counts.mean() - lam) < 3 * math.sqrt(lam / n)


def test_pp_coverage_floor(rng):
    cfg = LimitConfig(u_min=0.3)
    disp = DisplacementModel.iid(2.0, 0.5)
    for _ in range(20):
        m, scale = sample_limit_point_process(disp, BINARY, cfg, rng)
        if m.n_atoms:
            assert np.abs(m.locations).min() >= scale * cfg.u_min - 1e-12


def test_pp_angular_atoms(rng):
    cfg = LimitConfig(u_min=0.4)
    disp = DisplacementModel.discrete_angular(
        2.0, [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]], [3.0, 3.0, 1.0, 1.0]
    )
    env = EnvironmentModel.single(Deterministic(2))
    signs = []
    for _ in range(300):
        m, scale = sample_limit_point_process(disp, env, cfg, rng)
        signs.extend(np.sign(m.locations).tolist())
    # derived balance 0.75 shows up in the atom signs
    signs = np.asarray(signs)
    frac = (signs > 0).mean()
    assert abs(frac - 0.75) < 3 * math.sqrt(0.75 * 0.25 / signs.size)
