import itertools
import math
from fractions import Fraction

import pytest

from radio_elect import analysis as A
from radio_elect.errors import DomainError, SizeError
from radio_elect.protocols import round_length


def wake_probs(j, alpha, k_start=1):
    return [Fraction(1, 2 ** (k_start + i)) for i in range(round_length(j, alpha))]


def brute_alg1(n, j, alpha, k_start=1):
    """Enumerate every wake pattern; success iff exactly one distinct lone sender."""
    probs = wake_probs(j, alpha, k_start)
    total = Fraction(0)
    for pattern in itertools.product((0, 1), repeat=n * len(probs)):
        weight = Fraction(1)
        lone = set()
        for s, p in enumerate(probs):
            woke = pattern[s * n:(s + 1) * n]
            for w in woke:
                weight *= p if w else 1 - p
            if sum(woke) == 1:
                lone.add(woke.index(1))
        if len(lone) == 1:
            total += weight
    return total


def brute_alg2(n, j, alpha, k_start=1):
    """Enumerate sleep/send/listen per station and slot; success iff one witness station."""
    probs = wake_probs(j, alpha, k_start)
    total = Fraction(0)
    for pattern in itertools.product((0, 1, 2), repeat=n * len(probs)):
        weight = Fraction(1)
        witnesses = set()
        for s, p in enumerate(probs):
            acts = pattern[s * n:(s + 1) * n]
            for a in acts:
                weight *= (1 - p) if a == 0 else p / 2
            if acts.count(1) == 1:
                witnesses.update(i for i, a in enumerate(acts) if a == 2)
        if len(witnesses) == 1:
            total += weight
    return total


def brute_awake_alg2(n, j, alpha):
    """Expected awake slots of station 0 in one Alg2 round."""
    probs = wake_probs(j, alpha)
    total = Fraction(0)
    for pattern in itertools.product((0, 1, 2), repeat=n * len(probs)):
        weight = Fraction(1)
        awake = 1
        flagged = False
        for s, p in enumerate(probs):
            acts = pattern[s * n:(s + 1) * n]
            for a in acts:
                weight *= (1 - p) if a == 0 else p / 2
            awake += acts[0] != 0
            flagged |= acts[0] == 1 or (acts[0] == 2 and acts.count(1) == 1)
        total += weight * (awake + flagged)
    return total


def test_j_star():
    assert A.j_star(65536, 1.3361) == 10
    assert A.j_star(256, 2.0) == 3  # log2(log2 256) = 3 exactly
    assert A.j_star(2 ** 16, 2.0) == 4
    with pytest.raises(ValueError):
        A.j_star(1, 2.0)


def test_unique_broadcast_prob():
    assert A.unique_broadcast_prob(5, 2) == pytest.approx(5 * 0.25 * 0.75 ** 4, rel=1e-14)
    assert A.unique_broadcast_prob(1, 3) == pytest.approx(0.125)
    assert A.unique_broadcast_prob(2 ** 20, 2000) == 0.0


def test_witness_pair_prob():
    # one sends, one listens, the other n-2 sleep
    n, k = 4, 2
    p = 0.25
    assert A.witness_pair_prob(n, k) == pytest.approx(n * (n - 1) * (p / 2) ** 2 * (1 - p) ** (n - 2))


@pytest.mark.parametrize("n,j,alpha", [(3, 2, 2.0), (8, 3, 1.5), (1024, 9, 1.3361)])
def test_formula_matches_direct_products(n, j, alpha):
    u = [A.unique_broadcast_prob(n, k) for k in range(1, round_length(j, alpha) + 1)]
    direct_p = sum(u[k] * math.prod(1 - u[i] for i in range(len(u)) if i != k) for k in range(len(u)))
    p, s = A.p_round_alg1_formula(n, j, alpha)
    assert p == pytest.approx(direct_p, rel=1e-12)
    assert s == pytest.approx(math.prod(1 - x for x in u), rel=1e-12)


@pytest.mark.parametrize("n,j,alpha,k_start", [(2, 1, 2.0, 1), (3, 2, 2.0, 1), (4, 3, 1.3361, 1),
                                                (3, 1, 2.0, 2), (2, 3, 1.5, 1)])
def test_alg1_dp_matches_enumeration(n, j, alpha, k_start):
    exact = brute_alg1(n, j, alpha, k_start)
    assert A.exact_round_success_alg1(n, j, alpha, k_start) == pytest.approx(float(exact), rel=1e-12)


@pytest.mark.parametrize("n,j,alpha,k_start", [(2, 1, 2.0, 1), (2, 3, 1.5, 1), (3, 1, 2.0, 1),
                                                (3, 1, 2.0, 3), (4, 1, 2.0, 1)])
def test_alg2_dp_matches_enumeration(n, j, alpha, k_start):
    exact = brute_alg2(n, j, alpha, k_start)
    assert A.exact_round_success_alg2(n, j, alpha, k_start) == pytest.approx(float(exact), rel=1e-12)


def test_hand_values():
    assert A.exact_round_success_alg1(2, 1, 2.0, 1) == 0.59375
    # slot 1 (p=1/2) pairs with prob 1/8, slot 2 (p=1/4) with 1/32:
    # 7/8 * 1/32 + 1/8 * (31/32 + 1/64) = 77/512
    assert A.exact_round_success_alg2(2, 1, 2.0, 1) == pytest.approx(77 / 512, abs=1e-15)


@pytest.mark.parametrize("n", [2, 3, 5, 8])
@pytest.mark.parametrize("alpha", [1.3361, 2.0])
def test_lumped_chains_match_full_dps(n, alpha):
    for j in range(1, 6):
        for k_start in (1, 2):
            assert A.round_success_alg1(n, j, alpha, k_start) == pytest.approx(
                A.exact_round_success_alg1(n, j, alpha, k_start), rel=1e-10, abs=1e-15)
            assert A.round_success_alg2(n, j, alpha, k_start) == pytest.approx(
                A.exact_round_success_alg2(n, j, alpha, k_start), rel=1e-10, abs=1e-15)


def test_lumped_alg1_matches_dp_at_oracle_limit():
    for j in (5, 9, 12):
        assert A.round_success_alg1(64, j, 1.3361) == pytest.approx(
            A.exact_round_success_alg1(64, j, 1.3361), rel=1e-10)


def test_exact_dp_dominates_formula():
    for n in range(2, 17):
        for j in range(1, 7):
            for alpha in (1.3361, 1.5, 2.0):
                exact = A.exact_round_success_alg1(n, j, alpha)
                assert exact >= A.p_round_alg1_formula(n, j, alpha)[0] - 1e-15


def test_size_limits():
    with pytest.raises(SizeError):
        A.exact_round_success_alg1(65, 1, 2.0)
    with pytest.raises(SizeError):
        A.exact_round_success_alg2(9, 1, 2.0)


def test_awake_per_round():
    for n, j, alpha in [(2, 1, 2.0), (3, 1, 2.0), (2, 3, 1.5)]:
        assert A.awake_per_round("alg2", n, j, alpha) == pytest.approx(float(brute_awake_alg2(n, j, alpha)))
    assert A.awake_per_round("alg1", 7, 1, 2.0) == pytest.approx(0.5 + 0.25 + 1)


def test_expected_run_geometric_chain():
    run = A.expected_run("alg1", 2, 2.0)
    succ = [A.round_success_alg1(2, j, 2.0) for j in range(1, len(run.first_success) + 1)]
    alive, mean = 1.0, 0.0
    for j, s in enumerate(succ, 1):
        mean += j * alive * s
        alive *= 1 - s
    assert run.rounds == pytest.approx(mean, rel=1e-12)
    assert sum(run.first_success) + run.unfinished == pytest.approx(1.0)
    assert run.total_slots - run.probabilistic_slots == pytest.approx(run.rounds)


def test_series_constants():
    c = A.series_constants()
    assert c.s_inf_alg1 == pytest.approx(0.188209, abs=1e-6)
    assert c.s_inf_alg2 == pytest.approx(0.462, abs=1e-3)
    assert c.sum_S2 == pytest.approx(1.9609, abs=1e-3)
    assert c.sum_S4 == pytest.approx(0.8274, abs=5e-4)
    assert c.p_inf_alg1 == pytest.approx(0.3690, abs=1e-3)
    assert c.p_inf_alg2 == pytest.approx(0.3825, abs=1e-3)
    assert c.q1 == pytest.approx(0.6305, abs=1e-3)
    assert c.q2 == pytest.approx(0.6176, abs=1e-3)


def test_limits_reached_by_formula_at_large_n():
    c = A.series_constants()
    n = 2 ** 40
    p, s = A.p_round_alg1_formula(n, A.j_star(n, 1.3361) + 3, 1.3361)
    assert s == pytest.approx(c.s_inf_alg1, abs=2e-4)
    assert p == pytest.approx(c.p_inf_alg1, abs=2e-4)


def test_pair_formula_limit():
    # sum_k v_k**m tends to (2m-1)! / (4**m m**(2m) ln 2), which is not the
    # m! / (2**m m**(m+1) ln 2) series quoted for the constants s_inf_alg2, sum_S4
    terms = [math.factorial(2 * m - 1) / (4 ** m * m ** (2 * m) * math.log(2)) for m in range(1, 40)]
    s_lim = math.exp(-sum(t / m for m, t in enumerate(terms, 1)))
    p_lim = s_lim * sum(terms)
    n = 2 ** 40
    p2, s2 = A.p_round_alg2_formula(n, A.j_star(n, 1.3361) + 3, 1.3361)
    assert s2 == pytest.approx(s_lim, abs=1e-4)
    assert p2 == pytest.approx(p_lim, abs=1e-4)
    assert abs(s2 - A.series_constants().s_inf_alg2) > 0.2


def test_cost_function():
    assert A.c_of_alpha(0.6305, 1.3361) == pytest.approx(8.837, abs=0.01)
    assert A.c_of_alpha(0.6176, 1.3295) == pytest.approx(8.96, abs=0.01)
    prof = A.cost_profile(0.6305, 1.5)
    assert prof.alpha_max == pytest.approx(2.707, abs=1e-2)
    assert prof.c == A.c_of_alpha(0.6305, 1.5)


@pytest.mark.parametrize("q,alpha", [(0.6305, 1.0), (0.6305, 2.8), (0.6176, 2.62), (0.0, 1.5), (1.2, 1.5)])
def test_cost_function_domain(q, alpha):
    with pytest.raises(DomainError):
        A.c_of_alpha(q, alpha)


def test_optimal_alpha():
    a, c = A.optimal_alpha(0.6305)
    assert a == pytest.approx(1.3361, abs=1e-3)
    assert c == pytest.approx(8.837, abs=1e-2)
    # q = 1: alpha^3 / (alpha - 1) is minimal at alpha = 3/2 with value 27/4
    a1, c1 = A.optimal_alpha(1.0)
    assert a1 == pytest.approx(1.5, abs=1e-6)
    assert c1 == pytest.approx(6.75, abs=1e-9)


def test_harmonic_sums():
    assert A.lemma1_sum(2 ** 20, 60) == pytest.approx(1 / math.log(2), abs=1e-4)
    for m in range(1, 6):
        assert A.lemma2_sum(2 ** 20, m, 1, 60) == pytest.approx(A.lemma2_constant(m), abs=1e-3)
    assert A.lemma2_sum(2 ** 20, 1, 1, 60) == pytest.approx(A.lemma1_sum(2 ** 20, 60))
    with pytest.raises(ValueError):
        A.lemma2_sum(1024, 2, 5, 5)
