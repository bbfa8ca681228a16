import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from seqlat.bench.scenario import ScenarioConfig, level_medians, run_scenario
from seqlat.errors import DegenerateLandmarksError, DegenerateStepError, InvalidInputError, NotLaterableError
from seqlat.geometry import diameter, embedding_error, read_configuration
from seqlat.graph import (
    DissimilarityGraph,
    DomainSpec,
    NoiseSpec,
    apply_noise,
    find_laterative_ordering,
    geometric_graph,
    is_laterative_ordering,
    sample_domain,
)
from seqlat.sequential import (
    SEED_SCALED,
    accuracy_constant,
    enumerate_cliques,
    noise_threshold,
    sequential_laterate_best,
    sequential_laterate_first,
    theory_bound,
    verify_perturbation_bound,
    write_embedding_result,
)
from seqlat.stress import s_stress

seeds = st.integers(0, 2**32 - 1)

# the ratio of largest to smallest empirical constant over the noise sweep,
# measured at 29, 30 and 15 on three calibration instances
SWEEP_RATIO_CEILING = 50.0


def rgg(seed, n=500, h=0.2, kappa=1.0, r=0.3):
    x = sample_domain(DomainSpec(h, kappa), n, seed)
    return x, geometric_graph(x, r)


def complete(x):
    n = len(x)
    e = list(itertools.combinations(range(n), 2))
    return DissimilarityGraph(n, e, [np.sum((x[i] - x[j]) ** 2) for i, j in e])


# ---- 'first'

def test_first_realizable_exact():
    x, g = rgg([1, 2], n=200, r=0.35)
    res = sequential_laterate_first(g, 2)
    assert embedding_error(res.config, x) <= 1e-16 * diameter(x) ** 2
    assert res.stress <= 1e-20
    assert is_laterative_ordering(g, res.ordering, 2)


def test_first_provenance():
    x, g = rgg([3, 4])
    res = sequential_laterate_first(g, 2)
    c = len(res.ordering.seed_clique)
    assert res.n_seed_scaled == c and res.n_laterated == g.n - c
    assert set(np.flatnonzero(res.provenance == SEED_SCALED)) == set(res.ordering.seed_clique)
    for k, v in enumerate(res.ordering.order):
        assert res.provenance[v] == (SEED_SCALED if k < c else k)


def test_first_uses_all_placed_neighbors():
    x, g = rgg([5, 6])
    res = sequential_laterate_first(g, 2)
    pos = {v: k for k, v in enumerate(res.ordering.order)}
    for v, lm in res.ordering.position_landmarks():
        placed = {u for u in g.neighbors(v).tolist() if pos[u] < pos[v]}
        assert set(lm) == placed


@pytest.mark.parametrize("kappa", [1.0, 2.0])
def test_hollow_frame_high_noise(kappa):
    x, g = rgg([7, int(kappa)], h=0.5, kappa=kappa)
    noisy, _ = apply_noise(g, NoiseSpec("additive-gaussian", 0.1, 8))
    res = sequential_laterate_first(noisy, 2)
    err = embedding_error(res.config, x)
    assert np.isfinite(err) and err >= 0


def test_first_not_laterable():
    g = DissimilarityGraph(10, [(i, i + 1) for i in range(9)], np.ones(9))
    with pytest.raises(NotLaterableError):
        sequential_laterate_first(g, 2)


def test_first_degenerate_step():
    x = np.column_stack([np.arange(6.0), np.zeros(6)])
    with pytest.raises(DegenerateStepError) as info:
        sequential_laterate_first(complete(x), 2, clique_strategy="minimal")
    assert info.value.step == 3


def test_first_input_validation():
    x, g = rgg([1, 1], n=60, r=0.6)
    with pytest.raises(InvalidInputError):
        sequential_laterate_first(g, 0)
    with pytest.raises(InvalidInputError):
        sequential_laterate_first(g, 2, clique_strategy="exact")
    with pytest.raises(InvalidInputError):
        sequential_laterate_first(g, 2, max_clique_size=2)


def test_minimal_clique_variant_exact():
    x, g = rgg([9, 9])
    res = sequential_laterate_first(g, 2, clique_strategy="minimal")
    assert len(res.ordering.seed_clique) == 3
    assert embedding_error(res.config, x) <= 1e-16 * diameter(x) ** 2


def test_first_deterministic():
    x, g = rgg([2, 2])
    noisy, _ = apply_noise(g, NoiseSpec("additive-gaussian", 1e-3, 1))
    a, b = sequential_laterate_first(noisy, 2), sequential_laterate_first(noisy, 2)
    assert a.config == b.config and a.ordering == b.ordering
    assert np.array_equal(a.provenance, b.provenance) and a.stress == b.stress


@settings(max_examples=20)
@given(seeds, st.integers(2, 3))
def test_realizable_exactness_property(seed, p):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(50, 201))
    x = rng.random((n, p))
    g = geometric_graph(x, 0.45 if p == 2 else 0.6)
    if find_laterative_ordering(g, p) is None:
        return
    for res in (sequential_laterate_first(g, p), sequential_laterate_best(g, p, budget=5, seed=seed)):
        assert embedding_error(res.config, x) <= 1e-16 * diameter(x) ** 2


# ---- 'best'

def test_best_realizable_zero_stress():
    x, g = rgg([3, 3], n=200, r=0.35)
    res = sequential_laterate_best(g, 2, budget=20)
    assert res.stress <= 1e-20
    assert embedding_error(res.config, x) <= 1e-16 * diameter(x) ** 2


def test_best_all_cliques_dominates_first():
    rng = np.random.default_rng(30)
    x = rng.random((30, 2))
    g, _ = apply_noise(geometric_graph(x, 0.5), NoiseSpec("additive-gaussian", 1e-3, 3))
    n_cliques = sum(1 for _ in enumerate_cliques(g, 3))
    best = sequential_laterate_best(g, 2, budget=n_cliques)
    first = sequential_laterate_first(g, 2)
    assert best.n_candidates >= n_cliques
    assert best.stress <= first.stress
    assert best.stress == pytest.approx(s_stress(best.config, g))


def test_best_deterministic_given_seed():
    x, g = rgg([4, 4])
    noisy, _ = apply_noise(g, NoiseSpec("additive-gaussian", 1e-3, 2))
    a = sequential_laterate_best(noisy, 2, budget=10, seed=5)
    b = sequential_laterate_best(noisy, 2, budget=10, seed=5)
    assert a.config == b.config and a.ordering == b.ordering


def test_best_budget_validation():
    x, g = rgg([1, 1], n=60, r=0.6)
    with pytest.raises(InvalidInputError):
        sequential_laterate_best(g, 2, budget=0)


def test_enumerate_cliques_brute_force(rng):
    x = rng.random((15, 2))
    g = geometric_graph(x, 0.5)
    brute = [c for c in itertools.combinations(range(15), 3)
             if all(g.has_edge(a, b) for a, b in itertools.combinations(c, 2))]
    assert list(enumerate_cliques(g, 3)) == brute


# ---- theory bound

def test_accuracy_constant_arithmetic():
    assert accuracy_constant(1.0, 1.0, 4, 2, 1.0, 1.0) == pytest.approx(2 / 3, rel=1e-15)


def test_boundary_exponents():
    a, w, p, c1, c2 = 3.0, 0.5, 2, 1.5, 2.0
    n = p + 2
    mix = max(c1 * a, c2 / (1 + c2 * a))
    assert accuracy_constant(a, w, n, p, c1, c2) == pytest.approx((1 + c2 * a) / ((p + 1) * w ** 2) * mix)
    second = (p + 1) * w ** 4 / (c2 ** 2 * mix)
    first = (p + 1) ** 2 * (w / c1) ** 4
    assert noise_threshold(a, w, n, p, c1, c2) == pytest.approx(min(first, second))


def _recursion(alpha, w, n, p, c1, c2):
    a = c1 * alpha / ((p + 1) * w ** 2)
    for _ in range(p + 1, n):
        a = max((1 + c2 * alpha) * a, c2 / ((p + 1) * w ** 2))
    return a


@pytest.mark.parametrize("seed", range(5))
def test_closed_form_matches_recursion(seed):
    rng = np.random.default_rng([seed, 6])
    x = rng.random((10, 2))
    g = geometric_graph(x, 1.5)
    o = find_laterative_ordering(g, 2, clique_strategy="minimal")
    c1, c2 = 1 + 2 * rng.random(2)
    tb = theory_bound(x, o, c1, c2)
    assert tb.A_n == pytest.approx(_recursion(tb.alpha, tb.omega_min, 10, 2, c1, c2), rel=1e-12)
    assert np.isfinite(tb.A_n) and np.isfinite(tb.sigma4_max)


def test_theory_bound_fields():
    x = np.array([[0, 0], [1, 0], [0, 1], [1, 1.0]])
    g = complete(x)
    o = find_laterative_ordering(g, 2, clique_strategy="minimal")
    tb = theory_bound(x, o)
    assert (tb.n, tb.p, tb.C1, tb.C2) == (4, 2, 1.0, 1.0)
    assert tb.omega_min > 0 and tb.alpha >= 1


def test_theory_bound_degenerate_and_constants():
    x = np.column_stack([np.arange(5.0), np.zeros(5)])
    g = complete(x + np.random.default_rng(0).normal(scale=1e-3, size=(5, 2)))
    o = find_laterative_ordering(g, 2, clique_strategy="minimal")
    with pytest.raises(DegenerateLandmarksError):
        theory_bound(x, o)
    with pytest.raises(InvalidInputError):
        theory_bound(x, o, C1=0.5)


def test_theory_bound_overflows_to_inf():
    x, g = rgg([0, 0])
    tb = theory_bound(x, find_laterative_ordering(g, 2))
    assert tb.A_n == np.inf and tb.sigma4_max == 0.0


# ---- perturbation check

def test_perturbation_realizable():
    x, g = rgg([8, 8])
    chk = verify_perturbation_bound(x, g, sequential_laterate_first(g, 2))
    assert chk.eps_sq_sum == 0 and not chk.violation and np.isnan(chk.ratio)
    assert chk.total_error <= 1e-16 * g.n * diameter(x) ** 2


def test_perturbation_flags_violation():
    x, g = rgg([8, 8])
    res = sequential_laterate_first(g, 2)
    wrong = res.config.points + np.random.default_rng(0).normal(scale=1e-3, size=(g.n, 2))
    assert verify_perturbation_bound(x, g, wrong).violation


def test_perturbation_size_mismatch():
    x, g = rgg([8, 8])
    with pytest.raises(InvalidInputError):
        verify_perturbation_bound(x.points[:10], g, sequential_laterate_first(g, 2))


def test_ratio_bounded_over_sweep():
    x, g = rgg([0, 21])
    ratios = []
    for k, s2 in enumerate((1e-5, 1e-4, 1e-3, 1e-2)):
        noisy, _ = apply_noise(g, NoiseSpec("additive-gaussian", s2, [0, k]))
        ratios.append(verify_perturbation_bound(x, noisy, sequential_laterate_first(noisy, 2)).ratio)
    assert max(ratios) / min(ratios) <= SWEEP_RATIO_CEILING


def test_ratio_below_theory_constant_tiny_instances():
    checked = 0
    for s in range(100):
        rng = np.random.default_rng([s, 5])
        n = int(rng.integers(5, 9))
        x = rng.random((n, 2))
        g = geometric_graph(x, 2.0)
        noisy, _ = apply_noise(g, NoiseSpec("additive-gaussian", 1e-10, s))
        res = sequential_laterate_first(noisy, 2, clique_strategy="minimal")
        tb = theory_bound(x, res.ordering)
        chk = verify_perturbation_bound(x, noisy, res)
        if chk.eps_sq_sum <= np.sqrt(tb.sigma4_max):
            checked += 1
            assert chk.ratio <= tb.A_n
    assert checked >= 50


def test_error_monotone_in_noise():
    cfg = ScenarioConfig(name="mono", trials=50, seed=11)
    med = [e for _, _, e in level_medians(run_scenario(cfg), "seq-lateration-first")]
    inversions = [(a, b) for a, b in zip(med, med[1:]) if b < a]
    assert len(inversions) <= 1 and all(b >= 0.95 * a for a, b in inversions)


def test_write_embedding_result(tmp_path):
    x, g = rgg([8, 1])
    res = sequential_laterate_first(g, 2)
    sidecar = write_embedding_result(tmp_path / "emb.csv", res, embedding_error=0.0)
    assert read_configuration(tmp_path / "emb.csv") == res.config
    info = json.loads(sidecar.read_text())
    assert info["n_laterated"] == res.n_laterated and info["embedding_error"] == 0.0
